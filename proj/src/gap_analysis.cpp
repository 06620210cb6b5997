#include "champagne/gap_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>

#include "champagne/errors.hpp"
#include "champagne/parallel.hpp"
#include "champagne/special_functions.hpp"

namespace champagne::gaps {

namespace {

constexpr double kPi = std::numbers::pi;
const double kSqrt2 = std::sqrt(2.0);

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::vector<GapRecord> measure_gaps(const radial::SpectrumTable& spectrum, int n,
                                    std::pair<double, double> x_window,
                                    const bs::QuantizationModel& model, std::string* warning) {
    std::vector<double> xs;
    for (const auto& e : spectrum.line(n))
        if (e.x >= x_window.first && e.x <= x_window.second) xs.push_back(e.x);
    std::sort(xs.begin(), xs.end());
    std::vector<GapRecord> out;
    if (xs.size() < 2) {
        if (warning)
            *warning = "measure_gaps: line n = " + std::to_string(n) +
                       " has fewer than 2 eigenvalues in the window";
        return out;
    }
    const double h = spectrum.h;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        GapRecord r;
        r.h = h;
        r.n = n;
        r.x_mid = 0.5 * (xs[i] + xs[i + 1]);
        r.gap_measured = xs[i + 1] - xs[i];
        r.gap_pred_general =
            bs::predicted_gap(r.x_mid, n, h, model, bs::GapVariant::general).gap_x;
        r.gap_pred_champagne =
            bs::predicted_gap(r.x_mid, n, h, model, bs::GapVariant::champagne).gap_x;
        r.rel_err_general = std::abs(r.gap_pred_general - r.gap_measured) / r.gap_measured;
        r.rel_err_champagne = std::abs(r.gap_pred_champagne - r.gap_measured) / r.gap_measured;
        out.push_back(r);
    }
    return out;
}

VariantScore score_variants(const std::vector<GapRecord>& records, const bs::QuantizationModel& model) {
    VariantScore s;
    for (const auto& r : records) {
        s.max_rel_general = std::max(s.max_rel_general, r.rel_err_general);
        s.max_rel_champagne = std::max(s.max_rel_champagne, r.rel_err_champagne);
    }
    const double ln2 = std::log(2.0);
    if (s.max_rel_champagne < s.max_rel_general) {
        s.winner = bs::GapVariant::champagne;
        s.ln2_coefficient = 4.5;
    } else {
        s.winner = bs::GapVariant::general;
        // Denominator constant at x = 0, n = 0: B - ln 2 - Psi_0'(0), written as c ln 2 + gamma.
        s.ln2_coefficient =
            (model.B - ln2 - special::psi_n_prime(0.0, 0) - std::numbers::egamma) / ln2;
    }
    return s;
}

double gap_k_delta(double h) { return h < 1e-4 * (1 - 1e-9) ? 0.025 : 0.05; }

radial::SpectrumTable line_spectrum(double h, int n, std::pair<double, double> x_window,
                                    double k_delta, bool richardson, unsigned workers) {
    if (!(x_window.first < x_window.second)) throw ConfigError("line_spectrum: empty x window");
    if (k_delta == 0) k_delta = gap_k_delta(h);
    const auto pot = radial::PotentialSpec::champagne_bottle();
    const std::pair<double, double> e_window{kSqrt2 * h * x_window.first, kSqrt2 * h * x_window.second};
    const auto config = radial::resolved_config(pot, e_window, h, k_delta, richardson);
    return radial::joint_spectrum(h, {n, n}, e_window, config, pot, workers);
}

Regression linear_regression(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw PreconditionError("linear_regression: need at least two paired samples");
    const double m = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / m, my = sy / m;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0) throw PreconditionError("linear_regression: all x values coincide");
    Regression r;
    r.slope = sxy / sxx;
    r.intercept = my - r.slope * mx;
    r.r2 = syy == 0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return r;
}

SmallestGapScan smallest_gap_scan(const std::vector<double>& h_list, const bs::QuantizationModel& model,
                                  const ScanOptions& options) {
    for (double h : h_list)
        if (!(h > 0) || h > 0.05) throw ConfigError("smallest_gap_scan: each h must lie in (0, 0.05]");
    if (!(options.x_half_width > 0)) throw ConfigError("smallest_gap_scan: x_half_width must be positive");
    SmallestGapScan scan;
    scan.rows.resize(h_list.size());
    const unsigned workers = options.workers ? options.workers : radial::default_workers();
    parallel_for(h_list.size(), workers, [&](std::size_t i) {
        const double h = h_list[i];
        const auto table = line_spectrum(h, 0, {-options.x_half_width, options.x_half_width},
                                         options.k_delta, options.richardson, 1);
        const auto records = measure_gaps(table, 0, {-options.x_half_width, options.x_half_width}, model);
        if (records.empty())
            throw ModelRangeError("smallest_gap_scan: no gaps on n = 0 at h = " + fmt(h));
        const auto best = std::min_element(records.begin(), records.end(), [](const auto& a, const auto& b) {
            return a.gap_measured < b.gap_measured;
        });
        SmallestGapRow row;
        row.h = h;
        row.abs_ln_h = std::abs(std::log(h));
        row.gap_min_measured = kSqrt2 * best->gap_measured;
        row.x_at_min = best->x_mid;
        row.gap_min_general = bs::predicted_gap(0.0, 0, h, model, bs::GapVariant::general).gap_E_over_h;
        row.gap_min_champagne =
            bs::predicted_gap(0.0, 0, h, model, bs::GapVariant::champagne).gap_E_over_h;
        scan.rows[i] = row;
    });
    if (scan.rows.size() >= 2) {
        std::vector<double> xs, ys;
        for (const auto& r : scan.rows) {
            xs.push_back(r.abs_ln_h);
            ys.push_back(1.0 / r.gap_min_measured);
        }
        scan.inverse_gap_vs_log = linear_regression(xs, ys);
    }
    return scan;
}

// ---------------------------------------------------------------------------------------
// Windows and counting

Window Window::rectangle(double u_min, double u_max, double v_min, double v_max) {
    Window w;
    w.vertices = {{u_min, v_min}, {u_max, v_min}, {u_max, v_max}, {u_min, v_max}};
    w.validate();
    return w;
}

void Window::validate() const {
    const std::size_t m = vertices.size();
    if (m < 3) throw ConfigError("Window: need at least 3 vertices");
    for (const auto& v : vertices)
        if (!std::isfinite(v[0]) || !std::isfinite(v[1])) throw ConfigError("Window: non-finite vertex");
    for (std::size_t i = 0; i < m; ++i) {
        const auto& a = vertices[i];
        const auto& b = vertices[(i + 1) % m];
        const auto& c = vertices[(i + 2) % m];
        const double cr = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
        if (cr < 0) throw ConfigError("Window: polygon must be convex and counter-clockwise");
    }
    if (!(area() > 0)) throw ConfigError("Window: degenerate polygon");
}

double Window::area() const {
    double s = 0;
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        const auto& a = vertices[i];
        const auto& b = vertices[(i + 1) % vertices.size()];
        s += a[0] * b[1] - b[0] * a[1];
    }
    return 0.5 * s;
}

std::array<double, 4> Window::bounds() const {
    std::array<double, 4> b{vertices[0][0], vertices[0][0], vertices[0][1], vertices[0][1]};
    for (const auto& v : vertices) {
        b[0] = std::min(b[0], v[0]);
        b[1] = std::max(b[1], v[0]);
        b[2] = std::min(b[2], v[1]);
        b[3] = std::max(b[3], v[1]);
    }
    return b;
}

std::optional<std::pair<double, double>> Window::slice(double v) const {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        const auto& a = vertices[i];
        const auto& b = vertices[(i + 1) % vertices.size()];
        if ((a[1] - v) * (b[1] - v) > 0) continue;
        if (a[1] == b[1]) {
            lo = std::min({lo, a[0], b[0]});
            hi = std::max({hi, a[0], b[0]});
        } else {
            const double u = a[0] + (v - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            lo = std::min(lo, u);
            hi = std::max(hi, u);
        }
    }
    if (lo > hi) return std::nullopt;
    return std::make_pair(lo, hi);
}

Window Window::in_xn() const {
    Window w = *this;
    for (auto& v : w.vertices) v[0] /= kSqrt2;
    return w;
}

WeylResult weyl_count(const radial::SpectrumTable& spectrum, const Window& K) {
    K.validate();
    const double h = spectrum.h;
    const auto b = K.bounds();
    const long n_lo = static_cast<long>(std::ceil(b[2])), n_hi = static_cast<long>(std::floor(b[3]));
    if (h * b[0] < spectrum.e_window.first || h * b[1] >= spectrum.e_window.second ||
        (n_lo <= n_hi && (n_lo < spectrum.n_range.first || n_hi > spectrum.n_range.second)))
        throw PreconditionError("weyl_count: hK is not inside the computed spectrum window");
    WeylResult r;
    r.h = h;
    const Window K0 = K.in_xn();
    double length = 0;
    for (long n = n_lo; n <= n_hi; ++n)
        if (const auto s = K0.slice(static_cast<double>(n))) length += s->second - s->first;
    r.predicted = std::abs(std::log(h)) / (2 * kPi) * length;
    for (const auto& e : spectrum.eigenvalues) {
        const auto s = K.slice(static_cast<double>(e.n));
        if (s && e.E1 / h >= s->first && e.E1 / h <= s->second) ++r.N;
    }
    r.residual = static_cast<double>(r.N) - r.predicted;
    return r;
}

radial::SpectrumTable spectrum_for_window(double h, const Window& K, double k_delta, unsigned workers) {
    K.validate();
    const auto b = K.bounds();
    const int n_lo = static_cast<int>(std::ceil(b[2])), n_hi = static_cast<int>(std::floor(b[3]));
    if (n_lo > n_hi) throw ConfigError("spectrum_for_window: window contains no integer n");
    const std::pair<double, double> e_window{h * (b[0] - 0.5), h * (b[1] + 0.5)};
    const auto pot = radial::PotentialSpec::champagne_bottle();
    const auto config = radial::resolved_config(pot, e_window, h, k_delta, false);
    return radial::joint_spectrum(h, {n_lo, n_hi}, e_window, config, pot, workers);
}

// ---------------------------------------------------------------------------------------
// Liouville volume

DHResult dh_volume(const Window& K, double h, const DHOptions& options) {
    K.validate();
    if (!(h > 0)) throw ConfigError("dh_volume: h must be positive");
    if (options.samples < 1000 || options.shards == 0)
        throw ConfigError("dh_volume: need at least 1000 samples and one shard");
    const auto b = K.bounds();
    const double L_lo = h * b[2], L_hi = h * b[3];
    const double e_top = std::max(h * b[1], 0.0);
    // Outermost radius where r^4 - r^2 can stay below the window.
    const double r_max = 1.0001 * std::sqrt(0.5 * (1.0 + std::sqrt(1.0 + 4.0 * e_top)));
    const double r_lo = 1e-9;
    const double log_span = std::log(r_max / r_lo);

    struct Acc {
        double sum = 0, sumsq = 0;
    };
    std::vector<Acc> acc(options.shards);
    const unsigned workers = options.workers ? options.workers : radial::default_workers();
    parallel_for(options.shards, workers, [&](std::size_t s) {
        std::uint64_t count = options.samples / options.shards;
        if (s + 1 == options.shards) count += options.samples % options.shards;
        std::mt19937_64 rng(options.seed + 0x9E3779B97F4A7C15ULL * (s + 1));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        Acc a;
        for (std::uint64_t i = 0; i < count; ++i) {
            const double r = unit(rng) < 0.5 ? r_max * unit(rng) : r_lo * std::exp(log_span * unit(rng));
            const double L = L_lo + (L_hi - L_lo) * unit(rng);
            double f = 0;
            if (r > 0) {
                if (const auto e = K.slice(L / h)) {
                    const double U = r * r * r * r - r * r + L * L / (2 * r * r);
                    const double Ea = h * e->first, Eb = h * e->second;
                    // Length of {p_r : U + p_r^2 / 2 in [Ea, Eb]}.
                    const double len = 2 * (std::sqrt(std::max(2 * (Eb - U), 0.0)) -
                                            std::sqrt(std::max(2 * (Ea - U), 0.0)));
                    const double q = 0.5 / r_max + (r >= r_lo ? 0.5 / (r * log_span) : 0.0);
                    f = 2 * kPi * len * (L_hi - L_lo) / q;
                }
            }
            a.sum += f;
            a.sumsq += f * f;
        }
        acc[s] = a;
    });
    double sum = 0, sumsq = 0;
    for (const auto& a : acc) {
        sum += a.sum;
        sumsq += a.sumsq;
    }
    const double N = static_cast<double>(options.samples);
    const double mean = sum / N;
    const double var = std::max(sumsq / N - mean * mean, 0.0);
    const double norm = (2 * kPi * h) * (2 * kPi * h);

    DHResult r;
    r.h = h;
    r.samples = options.samples;
    r.mu_over_norm = mean / norm;
    r.std_error = std::sqrt(var / N) / norm;
    r.asymptotic = std::abs(std::log(h)) / (2 * kPi) * K.in_xn().area();
    if (!(r.mu_over_norm > 0) || r.std_error > options.max_rel_error * r.mu_over_norm)
        throw SampleSizeError("dh_volume: Monte Carlo standard error " + fmt(r.std_error) +
                              " exceeds the requested fraction of the estimate " + fmt(r.mu_over_norm));
    return r;
}

// ---------------------------------------------------------------------------------------
// Output

void write_gaps_csv(const std::vector<GapRecord>& records, std::ostream& out) {
    out << "h,n,x_mid,gap_measured,gap_pred_general,gap_pred_champagne,rel_err_general,rel_err_champagne\n";
    for (const auto& r : records)
        out << fmt(r.h) << ',' << r.n << ',' << fmt(r.x_mid) << ',' << fmt(r.gap_measured) << ','
            << fmt(r.gap_pred_general) << ',' << fmt(r.gap_pred_champagne) << ','
            << fmt(r.rel_err_general) << ',' << fmt(r.rel_err_champagne) << '\n';
}

void write_weyl_csv(const std::vector<WeylResult>& rows, std::ostream& out) {
    out << "h,lnh_abs,N,predicted,residual\n";
    for (const auto& r : rows)
        out << fmt(r.h) << ',' << fmt(std::abs(std::log(r.h))) << ',' << r.N << ',' << fmt(r.predicted)
            << ',' << fmt(r.residual) << '\n';
}

void write_plot_data(const std::vector<std::pair<double, double>>& xy, std::ostream& out) {
    for (const auto& [x, y] : xy) out << fmt(x) << ' ' << fmt(y) << '\n';
}

}  // namespace champagne::gaps
