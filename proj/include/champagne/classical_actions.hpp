#pragma once

#include <array>
#include <iosfwd>
#include <utility>
#include <vector>

namespace champagne::classical {

/// Reduced radial motion of H = (p_r^2 + L^2/r^2)/2 - r^2 + r^4 at fixed angular momentum L.

struct TurningPoints {
    double r_minus = 0;
    double r_plus = 0;
};

/// Ends of the classically allowed interval. For L = 0 and E >= 0 the orbit runs
/// through the centre and r_minus = 0. Throws DomainError if no region is allowed.
TurningPoints turning_points(double E, double L);

/// p_r^2 = 2(E + r^2 - r^4) - L^2/r^2.
double radial_momentum_squared(double E, double L, double r);

struct RadialAction {
    double S_r = 0;          ///< closed-orbit action 2 int p_r dr
    double T = 0;            ///< radial period; +inf on the critical fibre
    bool degenerate = false; ///< r_plus - r_minus < 1e-8: S_r = 0, T from the harmonic limit
};

RadialAction radial_action(double E, double L);

/// Angle swept per radial period, 2 L int dr / (r^2 p_r). Takes the limit pi at L = 0
/// with E > 0 and 0 at L = 0 with E < 0. Throws DomainError at (0, 0).
double rotation_number(double E, double L);

/// Closing angle of the cycle gamma_1: -Theta for L >= 0 and -Theta - 2 pi for L < 0.
/// Continuous except across the cut E < 0, L = 0, where it jumps by 2 pi.
double closing_angle(double E, double L);

/// Action of gamma_1 (radial loop closed by the L-flow): S_r + 2 pi m L with the same
/// branch as closing_angle.
double gamma1_action(double E, double L);

/// Principal value A~ = S_gamma1 - Re(e0) + Re(e0 ln e0), e0 = E/sqrt(2) + i L.
/// Throws DomainError at (0, 0).
double regularized_action(double E, double L);

/// Homoclinic action at the critical value, 2 sqrt(2)/3.
double homoclinic_action();

struct ActionSample {
    double E = 0, L = 0;
    double r_minus = 0, r_plus = 0;
    double S_r = 0, T = 0, Theta = 0, A_reg = 0;
    bool degenerate = false;
};

ActionSample sample(double E, double L);

using Loop = std::vector<std::pair<double, double>>;  ///< closed polygon of (E, L) values

/// Continuous variation of the closing angle along the closed loop (the last vertex
/// connects back to the first). 2 pi for a counter-clockwise loop around (0, 0), 0 for a
/// loop that does not enclose it. Throws DomainError if the loop passes within 1e-4 of
/// the critical value or leaves the image of the momentum map.
double rotation_winding(const Loop& loop);

using IntMatrix = std::array<std::array<long, 2>, 2>;

/// Holonomy of the period lattice in the basis (gamma_1, gamma_2): (1 0; w 1) with w the
/// winding of the closing angle in units of 2 pi.
IntMatrix classical_monodromy(const Loop& loop);

/// Circle of radius rho around (E0, L0) with `vertices` points, counter-clockwise.
Loop circle_loop(double E0, double L0, double rho, int vertices = 64);

struct RayResult {
    double angle = 0;                ///< direction in the (E, L) plane, radians
    std::vector<double> rho;         ///< distances from the critical value
    std::vector<double> A_reg;       ///< regularized action along the ray
    std::vector<double> unregularized;  ///< S_gamma1 along the ray
    double limit = 0;                ///< Richardson-extrapolated value at rho = 0
    double divergence_slope = 0;     ///< slope of |S_gamma1 - limit| / rho against |ln rho|
};

/// Samples the ray at rho_max * 2^{-k}, k = 0..levels-1, and extrapolates twice
/// (first- and second-order Richardson).
RayResult regularized_action_ray(double angle, double rho_max = 1e-2, int levels = 10);

/// CSV with header E,L,r_minus,r_plus,S_r,T,Theta,A_reg.
void write_actions_csv(const std::vector<ActionSample>& samples, std::ostream& out);

}  // namespace champagne::classical
