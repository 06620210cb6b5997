#pragma once

#include <complex>

namespace champagne::special {

using Complex = std::complex<double>;

/// Rescaled argument (eps, n) of the Fourier constant of homogeneous distributions.
struct FourierConstantInput {
    double eps = 0;
    int n = 0;
};

/// log Gamma(z) on the plane cut along (-inf, 0].
/// The imaginary part is the continuous determination of arg Gamma, so that
/// 2 Im log_gamma((1+ix)/2) is a smooth function of x with no 2 pi jumps.
/// Throws DomainError at the poles z = 0, -1, -2, ...
Complex log_gamma(Complex z);

/// Logarithmic derivative of Gamma. Throws DomainError at the poles.
Complex digamma(Complex z);

/// C(eps, n) = i^{-|n|} 2^{i eps} Gamma((i eps + 1 + |n|)/2) / Gamma((-i eps + 1 + |n|)/2),
/// evaluated through log_gamma differences. Always evaluated with |n|.
Complex fourier_constant(FourierConstantInput in);

/// Psi_n(x) = 2 arg Gamma((ix + 1 + |n|)/2), continuous in x, odd, Psi_n(0) = 0.
double psi_n(double x, int n);

/// Psi_n'(x) = Re digamma((ix + 1 + |n|)/2); even in x with its minimum at x = 0.
double psi_n_prime(double x, int n);

/// Mellin transform of r^n exp(-r^2/2): 2^{(s+n)/2-1} Gamma((s+n)/2).
/// Requires n >= 0 and Re(s + n) > 0.
Complex mellin_gaussian(Complex s, int n);

/// |M f_n(i eps + 1) - i^n C(eps, n) M f_n(-i eps + 1)| for the self-reciprocal
/// Gaussian f_n; vanishes up to rounding when the Mellin-Hankel identity holds.
/// Negative n uses the profile of order |n|.
double verify_mellin_hankel(double eps, int n);

/// Leading Stirling form of Psi_n(x):
/// x ln(rho/2) - x - |n| atan2(|n|, x) + |n| pi/2, rho = sqrt(x^2 + n^2).
double psi_n_stirling(double x, int n);

}  // namespace champagne::special
