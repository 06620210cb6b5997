#include "champagne/tridiagonal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "champagne/errors.hpp"

namespace champagne::radial {

namespace {

constexpr double kPivMin = 1e-290;

double abs_tol(double rel_tol, double a, double b) {
    return rel_tol * std::max({1.0, std::abs(a), std::abs(b)});
}

// Smallest x in [a, b] such that at least index+1 eigenvalues lie below x.
double bisect_index(const SymTridiagonal& op, std::size_t index, double a, double b,
                    double rel_tol) {
    while (b - a > abs_tol(rel_tol, a, b)) {
        const double mid = 0.5 * (a + b);
        if (mid <= a || mid >= b)
            break;
        if (sturm_count(op, mid) > index)
            b = mid;
        else
            a = mid;
    }
    return 0.5 * (a + b);
}

void isolate(const SymTridiagonal& op, double a, double b, std::size_t ca, std::size_t cb,
             double rel_tol, std::vector<IndexedEigenvalue>& out) {
    if (cb <= ca)
        return;
    if (cb - ca == 1 || b - a <= abs_tol(rel_tol, a, b)) {
        for (std::size_t i = ca; i < cb; ++i)
            out.push_back({i, bisect_index(op, i, a, b, rel_tol)});
        return;
    }
    const double mid = 0.5 * (a + b);
    const std::size_t cm = sturm_count(op, mid);
    isolate(op, a, mid, ca, cm, rel_tol, out);
    isolate(op, mid, b, cm, cb, rel_tol, out);
}

}  // namespace

std::size_t sturm_count(const SymTridiagonal& op, double x) {
    const std::size_t n = op.diag.size();
    if (n == 0)
        return 0;
    const double* a = op.diag.data();
    const double* b = op.off.data();
    std::size_t count = 0;
    double d = a[0] - x;
    if (std::abs(d) < kPivMin)
        d = -kPivMin;
    count += d < 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        d = (a[i] - x) - b[i - 1] * b[i - 1] / d;
        if (std::abs(d) < kPivMin)
            d = -kPivMin;
        count += d < 0.0;
    }
    return count;
}

std::pair<double, double> gershgorin_bounds(const SymTridiagonal& op) {
    const std::size_t n = op.diag.size();
    if (n == 0)
        return {0.0, 0.0};
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < n; ++i) {
        double radius = 0.0;
        if (i > 0)
            radius += std::abs(op.off[i - 1]);
        if (i + 1 < n)
            radius += std::abs(op.off[i]);
        lo = std::min(lo, op.diag[i] - radius);
        hi = std::max(hi, op.diag[i] + radius);
    }
    return {lo, hi};
}

std::vector<IndexedEigenvalue> eigenvalues_in(const SymTridiagonal& op, double lo, double hi,
                                              double rel_tol) {
    std::vector<IndexedEigenvalue> out;
    if (op.size() == 0 || !(hi > lo))
        return out;
    const auto [glo, ghi] = gershgorin_bounds(op);
    const double a = std::max(lo, glo - abs_tol(rel_tol, glo, glo));
    const double b = std::min(hi, ghi + abs_tol(rel_tol, ghi, ghi));
    if (!(b > a))
        return out;
    const std::size_t ca = sturm_count(op, a);
    const std::size_t cb = sturm_count(op, b);
    out.reserve(cb - ca);
    isolate(op, a, b, ca, cb, rel_tol, out);
    return out;
}

std::vector<double> eigenvalues_below(const SymTridiagonal& op, double e_max, double rel_tol) {
    const auto [glo, ghi] = gershgorin_bounds(op);
    const double lo = glo - abs_tol(rel_tol, glo, glo);
    const auto found =
        eigenvalues_in(op, lo, std::nextafter(e_max, std::numeric_limits<double>::infinity()),
                       rel_tol);
    std::vector<double> values;
    values.reserve(found.size());
    for (const auto& e : found)
        values.push_back(e.value);
    return values;
}

SymTridiagonal dirichlet_laplacian(std::size_t nodes, double length, double h) {
    if (nodes == 0 || !(length > 0))
        throw ConfigError("dirichlet_laplacian: need at least one node and a positive length");
    const double delta = length / double(nodes + 1);
    const double k = h * h / (delta * delta);
    SymTridiagonal op;
    op.diag.assign(nodes, k);
    op.off.assign(nodes - 1, -0.5 * k);
    return op;
}

}  // namespace champagne::radial
