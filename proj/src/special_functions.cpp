#include "champagne/special_functions.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

#include "champagne/errors.hpp"

namespace champagne::special {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kLn2 = std::numbers::ln2;

// Lanczos approximation with g = 607/128 and 14 correction terms (Godfrey).
constexpr double kLanczosG = 607.0 / 128.0;
constexpr double kLanczosC0 = 0.999999999999997092;
constexpr std::array<double, 14> kLanczosCoef = {
    57.1562356658629235,     -59.5979603554754912,    14.1360979747417471,
    -0.491913816097620199,   0.339946499848118887e-4, 0.465236289270485756e-4,
    -0.983744753048795646e-4, 0.158088703224912494e-3, -0.210264441724104883e-3,
    0.217439618115212643e-3, -0.164318106536763890e-3, 0.844182239838527433e-4,
    -0.261908384015814087e-4, 0.368991826595316234e-5};
constexpr double kSqrt2Pi = 2.5066282746310005024;

bool is_pole(Complex z) {
    return z.imag() == 0.0 && z.real() <= 0.0 && z.real() == std::floor(z.real());
}

[[noreturn]] void throw_pole(const char* fn, Complex z) {
    std::ostringstream os;
    os << fn << ": pole of Gamma at z = " << z.real();
    throw DomainError(os.str());
}

// log Gamma for Re z >= 1/2. Every logarithm taken here has its argument in the
// right half plane, so the imaginary part is continuous.
Complex lanczos_log_gamma(Complex z) {
    Complex ser = kLanczosC0;
    for (std::size_t j = 0; j < kLanczosCoef.size(); ++j)
        ser += kLanczosCoef[j] / (z + double(j + 1));
    const Complex t = z + (kLanczosG + 0.5);
    return (z + 0.5) * std::log(t) - t + std::log(kSqrt2Pi * ser) - std::log(z);
}

// log sin(pi z) modulo 2 pi i, without overflow for large |Im z|.
Complex log_sin_pi(Complex z) {
    if (std::abs(z.imag()) < 30.0)
        return std::log(std::sin(kPi * z));
    if (z.imag() < 0.0)
        return std::conj(log_sin_pi(std::conj(z)));
    const Complex i(0.0, 1.0);
    const Complex e2 = std::exp(2.0 * i * kPi * z);
    return -i * kPi * z + std::log(1.0 - e2) + std::log(Complex(0.0, 0.5));
}

}  // namespace

Complex log_gamma(Complex z) {
    if (is_pole(z))
        throw_pole("log_gamma", z);
    if (z.real() >= 0.5)
        return lanczos_log_gamma(z);

    // Reflection gives the value modulo 2 pi i; the branch is pinned by the
    // recurrence Gamma(z) = Gamma(z+m) / (z (z+1) ... (z+m-1)).
    Complex value = std::log(kPi) - log_sin_pi(z) - lanczos_log_gamma(1.0 - z);
    const int m = int(std::ceil(0.5 - z.real()));
    double arg_ref = lanczos_log_gamma(z + double(m)).imag();
    for (int k = 0; k < m; ++k)
        arg_ref -= std::arg(z + double(k));
    const double turns = std::round((arg_ref - value.imag()) / (2.0 * kPi));
    return {value.real(), value.imag() + 2.0 * kPi * turns};
}

Complex digamma(Complex z) {
    if (is_pole(z))
        throw_pole("digamma", z);
    if (z.real() < 0.5)
        return digamma(1.0 - z) - kPi / std::tan(kPi * z);

    Complex shift = 0.0;
    while (z.real() < 10.0) {
        shift -= 1.0 / z;
        z += 1.0;
    }
    const Complex w = 1.0 / (z * z);
    // Bernoulli tail B_{2k} / (2k z^{2k}), k = 1..7, Horner in w
    const Complex tail =
        w * (1.0 / 12 -
             w * (1.0 / 120 -
                  w * (1.0 / 252 -
                       w * (1.0 / 240 -
                            w * (1.0 / 132 - w * (691.0 / 32760 - w * (1.0 / 12)))))));
    return shift + std::log(z) - 0.5 / z - tail;
}

Complex fourier_constant(FourierConstantInput in) {
    const int m = std::abs(in.n);
    const Complex z(0.5 * (1 + m), 0.5 * in.eps);
    const Complex i(0.0, 1.0);
    const Complex phase = i * (in.eps * kLn2) + log_gamma(z) - log_gamma(std::conj(z));
    static constexpr std::array<Complex, 4> kInversePowersOfI = {
        Complex(1, 0), Complex(0, -1), Complex(-1, 0), Complex(0, 1)};
    return kInversePowersOfI[m % 4] * std::exp(phase);
}

double psi_n(double x, int n) {
    const Complex z(0.5 * (1 + std::abs(n)), 0.5 * std::abs(x));
    const double v = 2.0 * log_gamma(z).imag();
    return x < 0 ? -v : v;
}

double psi_n_prime(double x, int n) {
    const Complex z(0.5 * (1 + std::abs(n)), 0.5 * std::abs(x));
    return digamma(z).real();
}

Complex mellin_gaussian(Complex s, int n) {
    if (n < 0)
        throw DomainError("mellin_gaussian: order n must be non-negative");
    const Complex w = 0.5 * (s + double(n));
    if (w.real() <= 0.0) {
        std::ostringstream os;
        os << "mellin_gaussian: Re(s + n) = " << 2.0 * w.real()
           << " is outside the convergence half-plane";
        throw DomainError(os.str());
    }
    return std::exp((w - 1.0) * kLn2 + log_gamma(w));
}

double verify_mellin_hankel(double eps, int n) {
    static constexpr std::array<Complex, 4> kPowersOfI = {Complex(1, 0), Complex(0, 1),
                                                          Complex(-1, 0), Complex(0, -1)};
    // the radial profile of angular index n is r^|n| exp(-r^2/2)
    const int m = std::abs(n);
    const Complex lhs = mellin_gaussian(Complex(1.0, eps), m);
    const Complex rhs = kPowersOfI[m % 4] * fourier_constant({eps, n}) *
                        mellin_gaussian(Complex(1.0, -eps), m);
    return std::abs(lhs - rhs);
}

double psi_n_stirling(double x, int n) {
    const double m = std::abs(n);
    const double rho = std::hypot(x, m);
    return x * std::log(rho / 2.0) - x - m * std::atan2(m, x) + m * kPi / 2.0;
}

}  // namespace champagne::special
