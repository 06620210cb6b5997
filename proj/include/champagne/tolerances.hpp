#pragma once

namespace champagne {

/// Numerical contracts shared by the modules and their tests.
struct Tolerances {
    // special functions
    static constexpr double log_gamma_rel = 1e-12;
    static constexpr double digamma_rel = 1e-10;
    static constexpr double fourier_modulus = 1e-12;
    static constexpr double mellin_hankel_residual = 1e-10;
    static constexpr double mellin_hankel_sweep = 1e-9;

    // eigensolver
    static constexpr double bisection_rel = 1e-12;

    // Bohr-Sommerfeld root polishing, in g-units
    static constexpr double bs_root = 1e-12;
    static constexpr double bs_fit_warning = 0.05;

    // lattice charts
    static constexpr double chart_residual = 0.05;
    static constexpr double transition_rounding = 0.1;
    static constexpr double chart_condition = 1e3;

    // classical quadrature
    static constexpr double quadrature_rel = 1e-10;
    static constexpr double turning_point_residual = 1e-10;
};

}  // namespace champagne
