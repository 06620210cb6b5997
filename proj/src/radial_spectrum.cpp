#include "champagne/radial_spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "champagne/errors.hpp"
#include "champagne/parallel.hpp"
#include "champagne/tolerances.hpp"

namespace champagne::radial {

namespace {

constexpr double kSqrt2 = std::numbers::sqrt2;

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Outermost r where V(r) < target (0 when V >= target everywhere).
double outermost_below(const PotentialSpec& v, double target) {
    double hi = 1.0;
    while (v(hi) < target || v(2 * hi) < v(hi))
        hi *= 2.0;
    const int samples = 4096;
    double last = -1.0;
    for (int i = 0; i <= samples; ++i) {
        const double r = hi * i / samples;
        if (v(r) < target)
            last = r;
    }
    if (last < 0)
        return 0.0;
    double a = last, b = std::min(hi, last + hi / samples);
    for (int it = 0; it < 100; ++it) {
        const double m = 0.5 * (a + b);
        (v(m) < target ? a : b) = m;
    }
    return b;
}

}  // namespace

PotentialSpec PotentialSpec::champagne_bottle() {
    return {PotentialKind::champagne_bottle, {0.0, -1.0, 1.0}};
}

PotentialSpec PotentialSpec::harmonic_test() { return {PotentialKind::harmonic_test, {0.0, 0.5}}; }

PotentialSpec PotentialSpec::custom(std::vector<double> coefficients) {
    while (!coefficients.empty() && coefficients.back() == 0.0)
        coefficients.pop_back();
    if (coefficients.size() < 2 || !(coefficients.back() > 0.0))
        throw ConfigError(
            "custom_polynomial potential must be confining: leading coefficient of the "
            "polynomial in r^2 must be positive");
    for (double c : coefficients)
        if (!std::isfinite(c))
            throw ConfigError("custom_polynomial potential has a non-finite coefficient");
    return {PotentialKind::custom_polynomial, std::move(coefficients)};
}

double PotentialSpec::operator()(double r) const {
    const double s = r * r;
    double acc = 0.0;
    for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it)
        acc = acc * s + *it;
    return acc;
}

double PotentialSpec::minimum() const {
    double hi = 1.0;
    while ((*this)(2 * hi) < (*this)(hi) || (*this)(hi) < (*this)(0.0))
        hi *= 2.0;
    const int samples = 8192;
    int best = 0;
    for (int i = 1; i <= samples; ++i)
        if ((*this)(hi * i / samples) < (*this)(hi * best / samples))
            best = i;
    double a = hi * std::max(0, best - 1) / samples;
    double b = hi * std::min(samples, best + 1) / samples;
    for (int it = 0; it < 200; ++it) {
        const double m1 = a + (b - a) / 3, m2 = b - (b - a) / 3;
        ((*this)(m1) < (*this)(m2) ? b : a) = ((*this)(m1) < (*this)(m2) ? m2 : m1);
    }
    return (*this)(0.5 * (a + b));
}

std::string PotentialSpec::name() const {
    switch (kind) {
    case PotentialKind::champagne_bottle: return "champagne_bottle";
    case PotentialKind::harmonic_test: return "harmonic_test";
    case PotentialKind::custom_polynomial: return "custom_polynomial";
    }
    return "unknown";
}

void DiscretizationConfig::validate() const {
    if (!(r_max > 0.0) || !std::isfinite(r_max))
        throw ConfigError("discretization: r_max must be positive and finite");
    if (grid_points < 64)
        throw ConfigError("discretization: grid_points must be >= 64");
    if (!(h > 0.0 && h <= 1.0))
        throw ConfigError("discretization: h must lie in (0, 1]");
}

std::vector<JointEigenvalue> SpectrumTable::line(int n) const {
    std::vector<JointEigenvalue> out;
    for (const auto& e : eigenvalues)
        if (e.n == n)
            out.push_back(e);
    return out;
}

double default_r_max(const PotentialSpec& potential, double e_max, double h) {
    const double r_star = outermost_below(potential, 2.0 * std::max(e_max, 0.0));
    double r_max = 1.25 * r_star;

    // extend until exp(-2 * 35) suppression beyond the outer turning point
    const double r_turn = outermost_below(potential, e_max);
    const double dr = std::max(1e-4, 1e-3 * std::max(r_turn, 1.0));
    double exponent = 0.0;
    double r = r_turn;
    while (exponent < 35.0) {
        const double excess = potential(r + 0.5 * dr) - e_max;
        exponent += std::sqrt(2.0 * std::max(excess, 0.0)) / h * dr;
        r += dr;
    }
    return std::max(r_max, r);
}

int default_grid_points(double h) {
    if (h >= 0.1)
        return 4096;
    if (h <= 1e-3)
        return 16384;
    const double t = (std::log10(0.1) - std::log10(h)) / 2.0;
    return int(std::lround(4096.0 * std::pow(4.0, t)));
}

int resolved_grid_points(const PotentialSpec& potential, double e_max, double h, double r_max,
                         double k_delta) {
    const double p_max = std::sqrt(2.0 * std::max(e_max - potential.minimum(), 0.0));
    const double n = std::ceil(r_max * p_max / (h * k_delta));
    return std::max(64, int(std::ceil(n / 1024.0)) * 1024);
}

DiscretizationConfig resolved_config(const PotentialSpec& potential, std::pair<double, double> e_window,
                                     double h, double k_delta, bool richardson) {
    if (!(h > 0.0 && h <= 1.0))
        throw ConfigError("discretization: h must lie in (0, 1]");
    if (!(k_delta > 0.0) || !std::isfinite(k_delta))
        throw ConfigError("discretization: k_delta must be positive");
    if (!(e_window.first < e_window.second) || !std::isfinite(e_window.second))
        throw ConfigError("discretization: empty or non-finite energy window");
    DiscretizationConfig c;
    c.h = h;
    c.r_max = default_r_max(potential, e_window.second, h);
    c.grid_points = std::max(default_grid_points(h) / (richardson ? 2 : 1),
                             resolved_grid_points(potential, e_window.second, h, c.r_max, k_delta));
    c.richardson = richardson;
    c.validate();
    return c;
}

void check_truncation(const DiscretizationConfig& config, const PotentialSpec& potential,
                      double e_max) {
    const double wall = potential(config.r_max);
    const double bound = 2.0 * std::max(e_max, 0.0);
    if (wall < bound) {
        std::ostringstream os;
        os << "truncation bound violated: V(r_max = " << config.r_max << ") = " << wall
           << " < 2 max(E_max, 0) = " << bound;
        throw ConfigError(os.str());
    }
}

SymTridiagonal build_radial_operator(int n, const DiscretizationConfig& config,
                                     const PotentialSpec& potential) {
    config.validate();
    const std::size_t size = std::size_t(config.grid_points);
    const double delta = config.r_max / double(size);
    const double kin = 0.5 * config.h * config.h;
    const double n2 = double(n) * double(n);

    SymTridiagonal op;
    op.diag.resize(size);
    op.off.resize(size - 1);
    for (std::size_t j = 0; j < size; ++j) {
        const double r = (double(j) + 0.5) * delta;
        // (r_{j+1/2} + r_{j-1/2}) / r_j = 2 on every node, including j = 0 where r_{-1/2} = 0
        op.diag[j] = kin * (2.0 / (delta * delta) + n2 / (r * r)) + potential(r);
        if (j + 1 < size) {
            const double r_next = r + delta;
            const double r_face = (double(j) + 1.0) * delta;
            op.off[j] = -kin * r_face / (delta * delta * std::sqrt(r * r_next));
        }
    }
    return op;
}

std::vector<IndexedEigenvalue> line_eigenvalues(int n, const DiscretizationConfig& config,
                                                const PotentialSpec& potential, double e_min,
                                                double e_max) {
    if (!config.richardson) {
        const auto op = build_radial_operator(n, config, potential);
        return eigenvalues_in(op, e_min, e_max, Tolerances::bisection_rel);
    }
    DiscretizationConfig coarse = config;
    coarse.richardson = false;
    DiscretizationConfig fine = coarse;
    fine.grid_points = 2 * coarse.grid_points;
    const double margin = 0.25 * (e_max - e_min);
    const auto ec = eigenvalues_in(build_radial_operator(n, coarse, potential), e_min - margin,
                                   e_max + margin, Tolerances::bisection_rel);
    const auto ef = eigenvalues_in(build_radial_operator(n, fine, potential), e_min - margin,
                                   e_max + margin, Tolerances::bisection_rel);
    std::map<std::size_t, double> coarse_by_index;
    for (const auto& e : ec)
        coarse_by_index[e.index] = e.value;
    std::vector<IndexedEigenvalue> out;
    for (const auto& e : ef) {
        const auto it = coarse_by_index.find(e.index);
        if (it == coarse_by_index.end())
            continue;
        const double extrapolated = (4.0 * e.value - it->second) / 3.0;
        if (extrapolated >= e_min && extrapolated < e_max)
            out.push_back({e.index, extrapolated});
    }
    return out;
}

unsigned default_workers() {
    if (const char* env = std::getenv("CHAMPAGNE_WORKERS")) {
        const int v = std::atoi(env);
        if (v > 0)
            return unsigned(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

SpectrumTable joint_spectrum(double h, std::pair<int, int> n_range,
                             std::pair<double, double> e_window,
                             const DiscretizationConfig& config, const PotentialSpec& potential,
                             unsigned workers) {
    config.validate();
    if (std::abs(config.h - h) > 1e-15 * h)
        throw ConfigError("joint_spectrum: discretization h differs from requested h");
    if (!(e_window.first < e_window.second) || !std::isfinite(e_window.first) ||
        !std::isfinite(e_window.second))
        throw ConfigError("joint_spectrum: energy window must be a bounded interval [e_min, e_max)");
    if (n_range.first > n_range.second)
        throw ConfigError("joint_spectrum: n_min > n_max");
    check_truncation(config, potential, e_window.second);

    std::set<int> distinct;
    for (int n = n_range.first; n <= n_range.second; ++n)
        distinct.insert(std::abs(n));
    const std::vector<int> tasks(distinct.begin(), distinct.end());
    std::vector<std::vector<IndexedEigenvalue>> results(tasks.size());

    if (workers == 0)
        workers = default_workers();
    parallel_for(tasks.size(), workers, [&](std::size_t i) {
        results[i] = line_eigenvalues(tasks[i], config, potential, e_window.first, e_window.second);
    });

    SpectrumTable table;
    table.h = h;
    table.config = config;
    table.potential = potential;
    table.e_window = e_window;
    table.n_range = n_range;
    for (int n = n_range.first; n <= n_range.second; ++n) {
        const auto pos = std::lower_bound(tasks.begin(), tasks.end(), std::abs(n)) - tasks.begin();
        const auto& line = results[std::size_t(pos)];
        if (line.empty())
            table.empty_lines.push_back(n);
        for (const auto& e : line) {
            JointEigenvalue j;
            j.n = n;
            j.k = int(e.index);
            j.E1 = e.value;
            j.E2 = h * double(n);
            j.h = h;
            j.x = e.value / (kSqrt2 * h);
            table.eigenvalues.push_back(j);
        }
    }
    return table;
}

EpsilonCoords to_epsilon_coords(double E1, double E2, double h) {
    const double ratio = E2 / h;
    const double n = std::round(ratio);
    if (!(std::abs(ratio - n) < 1e-6)) {
        std::ostringstream os;
        os << "to_epsilon_coords: E2/h = " << ratio << " is not an integer";
        throw DomainError(os.str());
    }
    return {E1 / (kSqrt2 * h), int(n)};
}

std::pair<double, double> from_epsilon_coords(double x, int n, double h) {
    return {x * kSqrt2 * h, h * double(n)};
}

void write_spectrum_csv(const SpectrumTable& table, std::ostream& out) {
    out << "h,n,k,E1,E2,x\n";
    for (const auto& e : table.eigenvalues)
        out << fmt17(e.h) << ',' << e.n << ',' << e.k << ',' << fmt17(e.E1) << ','
            << fmt17(e.E2) << ',' << fmt17(e.x) << '\n';
}

SpectrumTable read_spectrum_csv(std::istream& in) {
    SpectrumTable table;
    std::string line;
    if (!std::getline(in, line) || line.rfind("h,n,k,E1,E2,x", 0) != 0)
        throw ConfigError("spectrum CSV: missing header h,n,k,E1,E2,x");
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        std::istringstream row(line);
        std::string field;
        std::vector<std::string> f;
        while (std::getline(row, field, ','))
            f.push_back(field);
        if (f.size() != 6)
            throw ConfigError("spectrum CSV: expected 6 fields in row '" + line + "'");
        JointEigenvalue e;
        e.h = std::stod(f[0]);
        e.n = std::stoi(f[1]);
        e.k = std::stoi(f[2]);
        e.E1 = std::stod(f[3]);
        e.E2 = std::stod(f[4]);
        e.x = std::stod(f[5]);
        if (first) {
            table.h = e.h;
            table.n_range = {e.n, e.n};
            table.e_window = {e.E1, e.E1};
            first = false;
        }
        table.n_range.first = std::min(table.n_range.first, e.n);
        table.n_range.second = std::max(table.n_range.second, e.n);
        table.e_window.first = std::min(table.e_window.first, e.E1);
        table.e_window.second = std::max(table.e_window.second, e.E1);
        table.eigenvalues.push_back(e);
    }
    table.config.h = table.h;
    std::stable_sort(table.eigenvalues.begin(), table.eigenvalues.end(),
                     [](const auto& a, const auto& b) { return a.n != b.n ? a.n < b.n : a.k < b.k; });
    return table;
}

}  // namespace champagne::radial
