#pragma once

#include <cstddef>
#include <vector>

namespace champagne::radial {

/// Real symmetric tridiagonal matrix: diag has size N, off has size N-1.
struct SymTridiagonal {
    std::vector<double> diag;
    std::vector<double> off;

    std::size_t size() const { return diag.size(); }
};

/// Number of eigenvalues strictly below x (Sturm sequence / LDL^T inertia).
std::size_t sturm_count(const SymTridiagonal& op, double x);

/// Gershgorin enclosure [lo, hi] of the spectrum.
std::pair<double, double> gershgorin_bounds(const SymTridiagonal& op);

/// One eigenvalue together with its position in the full ascending spectrum.
struct IndexedEigenvalue {
    std::size_t index = 0;
    double value = 0;
};

/// All eigenvalues in [lo, hi), isolated by Sturm counts and bisected to an
/// absolute tolerance of rel_tol * max(1, |E|). Output is ascending.
std::vector<IndexedEigenvalue> eigenvalues_in(const SymTridiagonal& op, double lo, double hi,
                                              double rel_tol = 1e-12);

/// All eigenvalues <= e_max.
std::vector<double> eigenvalues_below(const SymTridiagonal& op, double e_max,
                                      double rel_tol = 1e-12);

/// Test hook: -(h^2/2) u'' on [0, length] with Dirichlet ends, `nodes` interior points.
SymTridiagonal dirichlet_laplacian(std::size_t nodes, double length, double h);

}  // namespace champagne::radial
