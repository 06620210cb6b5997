#include "champagne/bohr_sommerfeld.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "champagne/errors.hpp"
#include "champagne/special_functions.hpp"
#include "champagne/tolerances.hpp"

namespace champagne::bs {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kLn2 = std::numbers::ln2;

double wrap_pi(double a) { return a - kTwoPi * std::round(a / kTwoPi); }

double wrap_2pi(double a) {
    double w = std::fmod(a, kTwoPi);
    if (w < 0)
        w += kTwoPi;
    return w >= kTwoPi ? 0.0 : w;
}

// The model-independent part of 2 pi g_n.
double base_phase(double x, int n, double h) {
    return std::abs(n) * kPi / 2.0 - x * std::log(2.0 * h) - special::psi_n(x, n);
}

void check_range(double h, std::pair<double, double> x_window) {
    if (!(h > 0.0 && h <= 0.05))
        throw ConfigError("Bohr-Sommerfeld model: h must lie in (0, 0.05]");
    if (!(x_window.first <= x_window.second) || std::abs(x_window.first) > 100.0 ||
        std::abs(x_window.second) > 100.0)
        throw ConfigError("Bohr-Sommerfeld model: x window must be an interval inside [-100, 100]");
}

}  // namespace

double champagne_reference_B() { return 2.5 * kLn2; }

QuantizationModel reference_model(double h, double B) {
    QuantizationModel m;
    m.B = B;
    m.h = h;
    m.source = "reference";
    return m;
}

double g_n(double x, int n, double h, const QuantizationModel& model) {
    return (base_phase(x, n, h) + x * model.B + n * model.C + model.offset_mod_2pi) / kTwoPi;
}

double g_n_slope(double x, int n, double h, const QuantizationModel& model) {
    return (model.B - std::log(2.0 * h) - special::psi_n_prime(x, n)) / kTwoPi;
}

std::vector<LineRoot> predict_line(int n, double h, const QuantizationModel& model,
                                   std::pair<double, double> x_window) {
    check_range(h, x_window);
    const auto [a, b] = x_window;
    // Psi_n' grows with |x|, so the slope is smallest at the window end farthest from 0
    const double far = std::abs(a) > std::abs(b) ? a : b;
    if (!(g_n_slope(far, n, h, model) > 0.0)) {
        std::ostringstream os;
        os << "g_n is not increasing at x = " << far << " for h = " << h << ", n = " << n;
        throw ModelRangeError(os.str());
    }

    std::vector<LineRoot> roots;
    const double ga = g_n(a, n, h, model), gb = g_n(b, n, h, model);
    double lo = a;
    for (double k = std::ceil(ga); k <= std::floor(gb); k += 1.0) {
        double hi = b;
        double x = lo + (hi - lo) * std::clamp((k - g_n(lo, n, h, model)) /
                                                   std::max(gb - g_n(lo, n, h, model), 1e-300),
                                               0.0, 1.0);
        for (int it = 0; it < 200; ++it) {
            const double f = g_n(x, n, h, model) - k;
            if (std::abs(f) < Tolerances::bs_root)
                break;
            (f < 0 ? lo : hi) = x;
            double next = x - f / g_n_slope(x, n, h, model);
            if (!(next > lo && next < hi))
                next = 0.5 * (lo + hi);
            if (next == x || hi - lo <= 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x)))
                break;
            x = next;
        }
        roots.push_back({int(k), x});
        lo = x;
    }
    return roots;
}

QuantizationModel fit_lines(const std::vector<std::pair<int, std::vector<double>>>& lines,
                            double h, std::optional<double> fix_B) {
    if (lines.empty())
        throw FitError("fit_model: no lines to fit", std::nan(""));
    for (const auto& [n, xs] : lines)
        if (xs.size() < 3) {
            std::ostringstream os;
            os << "fit_model: line n = " << n << " has " << xs.size()
               << " eigenvalues in the window, need at least 3";
            throw FitError(os.str(), std::nan(""));
        }

    // y = 2 pi k - base = x B + c_n, with k the consecutive label within the line
    struct LineData {
        int n;
        std::vector<double> x, y;
    };
    std::vector<LineData> data;
    for (const auto& [n, xs_in] : lines) {
        auto xs = xs_in;
        std::sort(xs.begin(), xs.end());
        LineData d{n, xs, {}};
        for (std::size_t i = 0; i < xs.size(); ++i)
            d.y.push_back(kTwoPi * double(i) - base_phase(xs[i], n, h));
        data.push_back(std::move(d));
    }

    auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double e : v)
            s += e;
        return s / double(v.size());
    };
    double B = 0;
    if (fix_B) {
        B = *fix_B;
    } else {
        double sxy = 0, sxx = 0;
        for (const auto& d : data) {
            const double mx = mean(d.x), my = mean(d.y);
            for (std::size_t i = 0; i < d.x.size(); ++i) {
                sxy += (d.x[i] - mx) * (d.y[i] - my);
                sxx += (d.x[i] - mx) * (d.x[i] - mx);
            }
        }
        if (!(sxx > 0))
            throw FitError("fit_model: eigenvalues do not span an x range", std::nan(""));
        B = sxy / sxx;
    }
    std::vector<double> c;
    for (const auto& d : data) {
        std::vector<double> r;
        for (std::size_t i = 0; i < d.x.size(); ++i)
            r.push_back(d.y[i] - d.x[i] * B);
        c.push_back(mean(r));
    }

    // circular fit c_n = n C + offset (mod 2 pi)
    const bool fit_C = data.size() >= 2;
    double C = 0, offset = 0;
    auto circular_offset = [&](double Cv, double& cost) {
        double sx = 0, sy = 0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            sx += std::cos(c[i] - data[i].n * Cv);
            sy += std::sin(c[i] - data[i].n * Cv);
        }
        const double off = std::atan2(sy, sx);
        cost = 0;
        for (std::size_t i = 0; i < data.size(); ++i)
            cost += std::pow(wrap_pi(c[i] - data[i].n * Cv - off), 2);
        return off;
    };
    if (fit_C) {
        double best = std::numeric_limits<double>::infinity();
        const int grid = 4096;
        for (int j = 0; j < grid; ++j) {
            const double Cv = -kPi + kTwoPi * j / grid;
            double cost;
            const double off = circular_offset(Cv, cost);
            if (cost < best) {
                best = cost;
                C = Cv;
                offset = off;
            }
        }
    } else {
        offset = c[0];
    }

    // integer shift per line, then one joint linear least-squares solve
    std::vector<double> shift;
    for (std::size_t i = 0; i < data.size(); ++i)
        shift.push_back(kTwoPi * std::round((c[i] - data[i].n * C - offset) / kTwoPi));
    const int cols = (fix_B ? 0 : 1) + (fit_C ? 1 : 0) + 1;
    std::size_t rows = 0;
    for (const auto& d : data)
        rows += d.x.size();
    Eigen::MatrixXd M(rows, cols);
    Eigen::VectorXd rhs(rows);
    std::size_t row = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        for (std::size_t j = 0; j < data[i].x.size(); ++j, ++row) {
            int col = 0;
            double target = data[i].y[j] - shift[i];
            if (!fix_B)
                M(row, col++) = data[i].x[j];
            else
                target -= B * data[i].x[j];
            if (fit_C)
                M(row, col++) = data[i].n;
            M(row, col) = 1.0;
            rhs(row) = target;
        }
    const Eigen::VectorXd sol = M.colPivHouseholderQr().solve(rhs);
    int col = 0;
    if (!fix_B)
        B = sol(col++);
    if (fit_C)
        C = sol(col++);
    offset = sol(col);
    const double rms = std::sqrt((M * sol - rhs).squaredNorm() / double(rows)) / kTwoPi;

    QuantizationModel model;
    model.B = B;
    model.C = fit_C ? wrap_pi(C) : 0.0;
    // moving C by 2 pi j moves every line by an integer, so wrapping is harmless
    model.offset_mod_2pi = wrap_2pi(offset);
    model.D = model.offset_mod_2pi;
    model.h = h;
    model.residual = rms;
    model.warning = rms > Tolerances::bs_fit_warning;
    model.source = "fit";
    return model;
}

QuantizationModel fit_model(const radial::SpectrumTable& spectrum, const std::vector<int>& n_set,
                            std::pair<double, double> x_window, std::optional<double> fix_B) {
    std::vector<std::pair<int, std::vector<double>>> lines;
    for (int n : n_set) {
        std::vector<double> xs;
        for (const auto& e : spectrum.eigenvalues)
            if (e.n == n && e.x >= x_window.first && e.x <= x_window.second)
                xs.push_back(e.x);
        lines.emplace_back(n, std::move(xs));
    }
    return fit_lines(lines, spectrum.h, fix_B);
}

GapPrediction predicted_gap(double x, int n, double h, const QuantizationModel& model,
                            GapVariant variant) {
    const double B = variant == GapVariant::general ? model.B : 3.5 * kLn2;
    const double denom = std::abs(std::log(h)) + B - kLn2 - special::psi_n_prime(x, n);
    if (!(denom > 0.0)) {
        std::ostringstream os;
        os << "predicted_gap: non-positive denominator " << denom << " at h = " << h;
        throw ModelRangeError(os.str());
    }
    GapPrediction p;
    p.n = n;
    p.x = x;
    p.h = h;
    p.gap_x = kTwoPi / denom;
    p.gap_E_over_h = std::numbers::sqrt2 * p.gap_x;
    p.variant = variant;
    return p;
}

std::string to_string(GapVariant v) {
    return v == GapVariant::general ? "general" : "champagne";
}

nlohmann::json to_json(const QuantizationModel& m) {
    nlohmann::json j;
    if (m.A)
        j["A"] = *m.A;
    j["B"] = m.B;
    j["C"] = m.C;
    j["D"] = m.D;
    j["h"] = m.h;
    j["offset_mod_2pi"] = m.offset_mod_2pi;
    j["residual"] = m.residual;
    j["warning"] = m.warning;
    j["source"] = m.source;
    return j;
}

QuantizationModel model_from_json(const nlohmann::json& j) {
    QuantizationModel m;
    try {
        if (j.contains("A") && !j["A"].is_null())
            m.A = j.at("A").get<double>();
        m.B = j.at("B").get<double>();
        m.C = j.value("C", 0.0);
        m.h = j.at("h").get<double>();
        m.offset_mod_2pi = wrap_2pi(j.value("offset_mod_2pi", 0.0));
        m.D = j.value("D", m.offset_mod_2pi);
        m.residual = j.value("residual", 0.0);
        m.warning = j.value("warning", false);
        m.source = j.value("source", std::string("file"));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("quantization model JSON: ") + e.what());
    }
    return m;
}

}  // namespace champagne::bs
