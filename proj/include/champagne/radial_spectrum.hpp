#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "champagne/tridiagonal.hpp"

namespace champagne::radial {

enum class PotentialKind { champagne_bottle, harmonic_test, custom_polynomial };

/// Radial potential V(r) = sum_i c_i (r^2)^i.
struct PotentialSpec {
    PotentialKind kind = PotentialKind::champagne_bottle;
    std::vector<double> coefficients{0.0, -1.0, 1.0};

    static PotentialSpec champagne_bottle();  ///< r^4 - r^2
    static PotentialSpec harmonic_test();     ///< r^2 / 2
    /// Throws ConfigError unless the leading coefficient is positive.
    static PotentialSpec custom(std::vector<double> coefficients);

    double operator()(double r) const;
    /// Smallest value of V on [0, inf).
    double minimum() const;
    std::string name() const;
};

enum class Scheme { fd2 };

struct DiscretizationConfig {
    double r_max = 1.25;
    int grid_points = 4096;
    double h = 0.1;
    Scheme scheme = Scheme::fd2;
    /// Combine grid_points and 2*grid_points eigenvalues as (4 E_fine - E_coarse) / 3.
    bool richardson = false;

    /// Throws ConfigError naming the first violated bound.
    void validate() const;
};

struct JointEigenvalue {
    int n = 0;
    int k = 0;       ///< radial index: position in the ascending spectrum of line n
    double E1 = 0;
    double E2 = 0;   ///< h * n
    double h = 0;
    double x = 0;    ///< E1 / (sqrt(2) h)
};

struct SpectrumTable {
    double h = 0;
    std::vector<JointEigenvalue> eigenvalues;  ///< sorted by (n, k)
    DiscretizationConfig config;
    PotentialSpec potential;
    std::pair<double, double> e_window{0, 0};
    std::pair<int, int> n_range{0, 0};
    std::vector<int> empty_lines;

    /// Eigenvalues of one angular line, ascending in k.
    std::vector<JointEigenvalue> line(int n) const;
};

/// Smallest r_max keeping the window away from the Dirichlet wall: V(r_max) >= 2 max(E, 0)
/// with a 25% margin, extended until the tunnelling exponent beyond the turning point
/// exceeds 35.
double default_r_max(const PotentialSpec& potential, double e_max, double h);

/// 4096 points at h >= 0.1, 16384 at h <= 1e-3, log-interpolated in between.
int default_grid_points(double h);

/// Grid size keeping (local wave number) * spacing below k_delta for energies up to e_max.
int resolved_grid_points(const PotentialSpec& potential, double e_max, double h, double r_max,
                         double k_delta);

/// Default r_max with a grid resolved to k_delta and optional Richardson extrapolation.
/// k_delta = 0.05 with Richardson gives gaps to about 1e-4 relative near the critical value.
DiscretizationConfig resolved_config(const PotentialSpec& potential, std::pair<double, double> e_window,
                                     double h, double k_delta = 0.05, bool richardson = true);

/// Throws ConfigError if V(r_max) < 2 max(e_max, 0).
void check_truncation(const DiscretizationConfig& config, const PotentialSpec& potential,
                      double e_max);

/// Finite-volume discretization of the radial operator
///   -(h^2/2) (1/r)(r f')' + (h^2 n^2 / 2 r^2) f + V f
/// on the half-offset grid r_j = (j + 1/2) delta, written for u = sqrt(r) f so that the
/// matrix is symmetric. Equivalent to -(h^2/2)(u'' - (n^2 - 1/4) u / r^2) + V u to second
/// order, without a node at r = 0.
SymTridiagonal build_radial_operator(int n, const DiscretizationConfig& config,
                                     const PotentialSpec& potential);

/// Radial eigenvalues of one line in [e_min, e_max) with their radial indices.
std::vector<IndexedEigenvalue> line_eigenvalues(int n, const DiscretizationConfig& config,
                                                const PotentialSpec& potential, double e_min,
                                                double e_max);

/// Joint spectrum of (H, I) for n in [n_min, n_max] and E1 in [e_min, e_max).
/// Lines are evaluated concurrently on `workers` threads (0 = environment/hardware default);
/// the merged output does not depend on the worker count.
SpectrumTable joint_spectrum(double h, std::pair<int, int> n_range,
                             std::pair<double, double> e_window,
                             const DiscretizationConfig& config, const PotentialSpec& potential,
                             unsigned workers = 0);

struct EpsilonCoords {
    double x = 0;
    int n = 0;
};

/// Linearized normal-form coordinates: x = E1 / (sqrt(2) h), n = round(E2 / h).
/// Throws DomainError if E2 / h is not an integer to within 1e-6.
EpsilonCoords to_epsilon_coords(double E1, double E2, double h);
std::pair<double, double> from_epsilon_coords(double x, int n, double h);

/// Worker count from CHAMPAGNE_WORKERS, else hardware concurrency.
unsigned default_workers();

/// CSV with header h,n,k,E1,E2,x; real values at 17 significant digits.
void write_spectrum_csv(const SpectrumTable& table, std::ostream& out);
/// Reads the CSV written above (provenance fields are left at defaults).
SpectrumTable read_spectrum_csv(std::istream& in);

}  // namespace champagne::radial
