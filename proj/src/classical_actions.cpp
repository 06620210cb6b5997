#include "champagne/classical_actions.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "champagne/errors.hpp"
#include "champagne/tolerances.hpp"

namespace champagne::classical {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDegenerateWidth = 1e-8;
constexpr double kCriticalDistance = 1e-4;

// Roots s0 <= s_minus <= s_plus of s^3 - s^2 - E s + L^2/2, the turning-point cubic in
// s = r^2. The allowed region is s_minus <= s <= s_plus.
struct Roots {
    double s0 = 0, sm = 0, sp = 0;
};

double cubic(double s, double E, double L) { return ((s - 1.0) * s - E) * s + 0.5 * L * L; }
double cubic_prime(double s, double E) { return (3.0 * s - 2.0) * s - E; }

double polish(double s, double E, double L) {
    for (int it = 0; it < 8; ++it) {
        const double d = cubic_prime(s, E);
        if (d == 0.0)
            break;
        const double next = s - cubic(s, E, L) / d;
        if (!(std::abs(cubic(next, E, L)) < std::abs(cubic(s, E, L))))
            break;
        s = next;
    }
    return s;
}

[[noreturn]] void throw_forbidden(double E, double L) {
    std::ostringstream os;
    os << "no classically allowed region at (E, L) = (" << E << ", " << L << ")";
    throw DomainError(os.str());
}

Roots roots(double E, double L) {
    if (!std::isfinite(E) || !std::isfinite(L) || E < -0.25)
        throw_forbidden(E, L);
    Roots r;
    if (L == 0.0) {
        const double sp = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * E));
        const double other = -E / sp;  // product of the nonzero roots is -E
        r.sp = sp;
        if (E >= 0.0) {
            r.s0 = other;
            r.sm = 0.0;
        } else {
            r.s0 = 0.0;
            r.sm = other;
        }
        return r;
    }
    const double p = -E - 1.0 / 3.0;
    const double q = -2.0 / 27.0 - E / 3.0 + 0.5 * L * L;
    if (!(p < 0.0) || 4.0 * p * p * p + 27.0 * q * q > 0.0)
        throw_forbidden(E, L);
    const double m = 2.0 * std::sqrt(-p / 3.0);
    const double arg = std::clamp(3.0 * q / (2.0 * p) * std::sqrt(-3.0 / p), -1.0, 1.0);
    r.sp = polish(m * std::cos(std::acos(arg) / 3.0) + 1.0 / 3.0, E, L);

    // deflate: s^2 - (1 - s_plus) s - L^2 / (2 s_plus), roots of opposite signs
    const double b = 1.0 - r.sp;
    const double c = -0.5 * L * L / r.sp;
    const double sq = std::sqrt(b * b - 4.0 * c);
    double pos, neg;
    if (b >= 0.0) {
        pos = 0.5 * (b + sq);
        neg = c / pos;
    } else {
        neg = 0.5 * (b - sq);
        pos = c / neg;
    }
    r.s0 = neg;
    r.sm = pos;
    if (r.sp - r.sm > 1e-6)
        r.sm = polish(r.sm, E, L);
    if (r.sm > r.sp)
        std::swap(r.sm, r.sp);
    if (r.sm <= 0.0)
        throw_forbidden(E, L);
    return r;
}

// Integrals over the allowed interval in s = m + w cos(phi), phi in [0, pi].
// The integrand receives s, s - s0 and sin^2(phi), all computed without cancellation
// from the distance to the nearer endpoint.
template <class F>
double phi_integral(const Roots& r, F f) {
    thread_local boost::math::quadrature::tanh_sinh<double> integrator;
    const double w = 0.5 * (r.sp - r.sm);
    const double gap = r.sm - r.s0;
    const double span = r.sp - r.s0;
    auto integrand = [&](double, double xc) -> double {
        double s2, c2;  // sin^2(phi/2), cos^2(phi/2)
        if (xc < 0.0) {
            s2 = std::pow(std::sin(-0.5 * xc), 2);
            c2 = 1.0 - s2;
        } else {
            c2 = std::pow(std::sin(0.5 * xc), 2);
            s2 = 1.0 - c2;
        }
        const bool near_inner = c2 < 0.5;
        const double s = near_inner ? r.sm + 2.0 * w * c2 : r.sp - 2.0 * w * s2;
        const double d = near_inner ? gap + 2.0 * w * c2 : span - 2.0 * w * s2;
        return f(s, d, 4.0 * s2 * c2, s2, w);
    };
    return integrator.integrate(integrand, 0.0, kPi, 1e-12);
}

double harmonic_period(double E, double L, const Roots& r) {
    (void)E;
    const double s = 0.5 * (r.sm + r.sp);
    const double omega2 = 12.0 * s - 2.0 + 3.0 * L * L / (s * s);
    return kTwoPi / std::sqrt(std::max(omega2, 1e-300));
}

bool is_critical(double E, double L) { return E == 0.0 && L == 0.0; }

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

double radial_momentum_squared(double E, double L, double r) {
    const double s = r * r;
    return 2.0 * (E + s - s * s) - (L == 0.0 ? 0.0 : L * L / s);
}

TurningPoints turning_points(double E, double L) {
    const Roots r = roots(E, L);
    return {std::sqrt(std::max(r.sm, 0.0)), std::sqrt(r.sp)};
}

RadialAction radial_action(double E, double L) {
    const Roots r = roots(E, L);
    RadialAction out;
    if (std::sqrt(r.sp) - std::sqrt(std::max(r.sm, 0.0)) < kDegenerateWidth) {
        out.degenerate = true;
        out.S_r = 0.0;
        out.T = harmonic_period(E, L, r);
        return out;
    }
    out.S_r = phi_integral(r, [&](double s, double d, double sin2, double s2, double w) {
        // sin^2(phi)/s, with the s_minus = 0 limit written out
        const double ratio = r.sm == 0.0 ? 2.0 * s2 / w : sin2 / s;
        return std::sqrt(2.0 * d) * w * w * ratio;
    });
    if (is_critical(E, L)) {
        out.T = kInf;
        return out;
    }
    out.T = phi_integral(r, [](double, double d, double, double, double) {
        return 1.0 / std::sqrt(2.0 * d);
    });
    return out;
}

double rotation_number(double E, double L) {
    if (is_critical(E, L))
        throw DomainError("rotation_number: (E, L) = (0, 0) is the focus-focus value");
    if (L == 0.0) {
        roots(E, L);  // domain check
        return E > 0.0 ? kPi : 0.0;
    }
    const Roots r = roots(E, L);
    if (std::sqrt(r.sp) - std::sqrt(r.sm) < kDegenerateWidth) {
        const double s = 0.5 * (r.sm + r.sp);
        return L / s * harmonic_period(E, L, r);
    }
    return L * phi_integral(r, [](double s, double d, double, double, double) {
               return 1.0 / (s * std::sqrt(2.0 * d));
           });
}

double closing_angle(double E, double L) {
    const double theta = rotation_number(E, L);
    return L >= 0.0 ? -theta : -theta - kTwoPi;
}

double gamma1_action(double E, double L) {
    const double s = radial_action(E, L).S_r;
    return L >= 0.0 ? s : s - kTwoPi * L;
}

double regularized_action(double E, double L) {
    if (is_critical(E, L))
        throw DomainError("regularized_action: evaluate the limit with regularized_action_ray");
    const double e = E / std::numbers::sqrt2;
    const double modulus = std::hypot(e, L);
    const double re_e_log_e = e * std::log(modulus) - L * std::atan2(L, e);
    return gamma1_action(E, L) - e + re_e_log_e;
}

double homoclinic_action() { return 2.0 * std::numbers::sqrt2 / 3.0; }

ActionSample sample(double E, double L) {
    ActionSample a;
    a.E = E;
    a.L = L;
    const auto tp = turning_points(E, L);
    a.r_minus = tp.r_minus;
    a.r_plus = tp.r_plus;
    const auto ra = radial_action(E, L);
    a.S_r = ra.S_r;
    a.T = ra.T;
    a.degenerate = ra.degenerate;
    if (is_critical(E, L)) {
        a.Theta = std::nan("");
        a.A_reg = homoclinic_action();
    } else {
        a.Theta = rotation_number(E, L);
        a.A_reg = regularized_action(E, L);
    }
    return a;
}

namespace {

double segment_distance_to_origin(std::pair<double, double> a, std::pair<double, double> b) {
    const double dx = b.first - a.first, dy = b.second - a.second;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0 ? -(a.first * dx + a.second * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(a.first + t * dx, a.second + t * dy);
}

double wrapped(double a) { return a - kTwoPi * std::round(a / kTwoPi); }

// Accumulated variation of -Theta from a to b, subdividing until every step is small.
double segment_variation(std::pair<double, double> a, double va, std::pair<double, double> b,
                         double vb, int depth) {
    const double step = wrapped(vb - va);
    if (std::abs(step) < 0.25 || depth > 30)
        return step;
    const std::pair<double, double> mid{0.5 * (a.first + b.first), 0.5 * (a.second + b.second)};
    const double vm = -rotation_number(mid.first, mid.second);
    return segment_variation(a, va, mid, vm, depth + 1) + segment_variation(mid, vm, b, vb, depth + 1);
}

}  // namespace

double rotation_winding(const Loop& loop) {
    if (loop.size() < 3)
        throw PreconditionError("rotation_winding: a loop needs at least three vertices");
    const std::size_t n = loop.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& a = loop[i];
        const auto& b = loop[(i + 1) % n];
        if (segment_distance_to_origin(a, b) < kCriticalDistance) {
            std::ostringstream os;
            os << "loop segment " << i << " passes within " << kCriticalDistance
               << " of the critical value (0, 0)";
            throw DomainError(os.str());
        }
    }
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i)
        values[i] = -rotation_number(loop[i].first, loop[i].second);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        total += segment_variation(loop[i], values[i], loop[(i + 1) % n], values[(i + 1) % n], 0);
    return total;
}

IntMatrix classical_monodromy(const Loop& loop) {
    const double winding = rotation_winding(loop);
    const double turns = winding / kTwoPi;
    const long w = std::lround(turns);
    if (std::abs(turns - double(w)) > 1e-2) {
        std::ostringstream os;
        os << "classical_monodromy: winding " << winding << " is not a multiple of 2 pi";
        throw DomainError(os.str());
    }
    return {{{1, 0}, {w, 1}}};
}

Loop circle_loop(double E0, double L0, double rho, int vertices) {
    Loop loop;
    for (int i = 0; i < vertices; ++i) {
        const double t = kTwoPi * i / vertices;
        loop.emplace_back(E0 + rho * std::cos(t), L0 + rho * std::sin(t));
    }
    return loop;
}

RayResult regularized_action_ray(double angle, double rho_max, int levels) {
    if (levels < 3 || !(rho_max > 0.0))
        throw ConfigError("regularized_action_ray: need rho_max > 0 and at least 3 levels");
    RayResult out;
    out.angle = angle;
    for (int k = 0; k < levels; ++k) {
        const double rho = rho_max * std::ldexp(1.0, -k);
        const double E = rho * std::cos(angle), L = rho * std::sin(angle);
        out.rho.push_back(rho);
        out.A_reg.push_back(regularized_action(E, L));
        out.unregularized.push_back(gamma1_action(E, L));
    }
    // A(rho) = A0 + a rho + b rho^2 + ...: eliminate the rho and rho^2 terms
    std::vector<double> first, second;
    for (int k = 0; k + 1 < levels; ++k)
        first.push_back(2.0 * out.A_reg[k + 1] - out.A_reg[k]);
    for (int k = 0; k + 2 < levels; ++k)
        second.push_back((4.0 * first[k + 1] - first[k]) / 3.0);
    out.limit = second.back();

    // |S - A0| / rho against |ln rho|
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int k = 0; k < levels; ++k) {
        const double x = std::abs(std::log(out.rho[k]));
        const double y = std::abs(out.unregularized[k] - out.limit) / out.rho[k];
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    out.divergence_slope = (levels * sxy - sx * sy) / (levels * sxx - sx * sx);
    return out;
}

void write_actions_csv(const std::vector<ActionSample>& samples, std::ostream& out) {
    out << "E,L,r_minus,r_plus,S_r,T,Theta,A_reg\n";
    for (const auto& a : samples)
        out << fmt17(a.E) << ',' << fmt17(a.L) << ',' << fmt17(a.r_minus) << ','
            << fmt17(a.r_plus) << ',' << fmt17(a.S_r) << ',' << fmt17(a.T) << ','
            << fmt17(a.Theta) << ',' << fmt17(a.A_reg) << '\n';
}

}  // namespace champagne::classical
