#include "champagne/monodromy_lattice.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include <Eigen/Dense>

#include "champagne/errors.hpp"

namespace champagne::lattice {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

double dist(Point a, Point b) { return std::hypot(a.E1 - b.E1, a.E2 - b.E2); }

double wrap_pi(double a) {
    a = std::fmod(a + std::numbers::pi, two_pi);
    if (a < 0) a += two_pi;
    return a - std::numbers::pi;
}

// Least-squares affine fit target ~ A source + c over paired 2-vectors.
struct AffineFit {
    Eigen::Matrix2d A;
    Eigen::Vector2d c;
};

AffineFit affine_lsq(const std::vector<Eigen::Vector2d>& source,
                     const std::vector<Eigen::Vector2d>& target) {
    const auto m = static_cast<Eigen::Index>(source.size());
    Eigen::MatrixXd X(m, 3);
    Eigen::MatrixXd Y(m, 2);
    for (Eigen::Index i = 0; i < m; ++i) {
        X(i, 0) = source[i](0);
        X(i, 1) = source[i](1);
        X(i, 2) = 1.0;
        Y(i, 0) = target[i](0);
        Y(i, 1) = target[i](1);
    }
    const Eigen::MatrixXd W = X.colPivHouseholderQr().solve(Y);  // 3 x 2
    AffineFit fit;
    fit.A << W(0, 0), W(1, 0), W(0, 1), W(1, 1);
    fit.c << W(2, 0), W(2, 1);
    return fit;
}

long lround_checked(double v) { return static_cast<long>(std::llround(v)); }

IntPoint mat_vec(const IntMatrix& m, IntPoint v) {
    return {m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]};
}

IntMatrix mul(const IntMatrix& a, const IntMatrix& b) {
    IntMatrix r{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
    return r;
}

using i128 = long long;

i128 cross(IntPoint o, IntPoint a, IntPoint b) {
    return static_cast<i128>(a[0] - o[0]) * (b[1] - o[1]) -
           static_cast<i128>(a[1] - o[1]) * (b[0] - o[0]);
}

bool on_segment(IntPoint a, IntPoint b, IntPoint p) {
    if (cross(a, b, p) != 0) return false;
    return std::min(a[0], b[0]) <= p[0] && p[0] <= std::max(a[0], b[0]) &&
           std::min(a[1], b[1]) <= p[1] && p[1] <= std::max(a[1], b[1]);
}

int sign(i128 v) { return (v > 0) - (v < 0); }

bool segments_intersect(IntPoint a, IntPoint b, IntPoint c, IntPoint d) {
    const int d1 = sign(cross(c, d, a)), d2 = sign(cross(c, d, b));
    const int d3 = sign(cross(a, b, c)), d4 = sign(cross(a, b, d));
    if (d1 * d2 < 0 && d3 * d4 < 0) return true;
    return on_segment(c, d, a) || on_segment(c, d, b) || on_segment(a, b, c) ||
           on_segment(a, b, d);
}

}  // namespace

std::vector<Point> points_of(const radial::SpectrumTable& table) {
    std::vector<Point> out;
    out.reserve(table.eigenvalues.size());
    for (const auto& e : table.eigenvalues) out.push_back({e.E1, e.E2});
    return out;
}

// ---------------------------------------------------------------------------------------
// PointIndex

PointIndex::PointIndex(const std::vector<Point>& points, double cell) : points_(&points), cell_(cell) {
    if (!(cell > 0)) throw ConfigError("PointIndex: cell size must be positive");
    for (std::size_t i = 0; i < points.size(); ++i) {
        const long a = static_cast<long>(std::floor(points[i].E1 / cell_));
        const long b = static_cast<long>(std::floor(points[i].E2 / cell_));
        buckets_[key(a, b)].push_back(i);
    }
}

std::vector<std::size_t> PointIndex::within(Point center, double radius) const {
    std::vector<std::size_t> out;
    const long a0 = static_cast<long>(std::floor((center.E1 - radius) / cell_));
    const long a1 = static_cast<long>(std::floor((center.E1 + radius) / cell_));
    const long b0 = static_cast<long>(std::floor((center.E2 - radius) / cell_));
    const long b1 = static_cast<long>(std::floor((center.E2 + radius) / cell_));
    for (long a = a0; a <= a1; ++a)
        for (long b = b0; b <= b1; ++b) {
            const auto it = buckets_.find(key(a, b));
            if (it == buckets_.end()) continue;
            for (std::size_t i : it->second)
                if (dist((*points_)[i], center) <= radius) out.push_back(i);
        }
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------------------
// Charts and transitions

std::array<double, 2> LatticeChart::operator()(Point p) const {
    return {(linear[0][0] * p.E1 + linear[0][1] * p.E2 + offset[0]) / h,
            (linear[1][0] * p.E1 + linear[1][1] * p.E2 + offset[1]) / h};
}

IntPoint LatticeChart::label(Point p) const {
    const auto v = (*this)(p);
    return {lround_checked(v[0]), lround_checked(v[1])};
}

bool LatticeChart::covers(Point p) const { return dist(p, center) <= radius; }

IntPoint ChartTransition::operator()(IntPoint l) const {
    const auto v = mat_vec(matrix, l);
    return {v[0] + shift[0], v[1] + shift[1]};
}

ChartTransition ChartTransition::then(const ChartTransition& next) const {
    ChartTransition r;
    r.matrix = mul(next.matrix, matrix);
    const auto s = mat_vec(next.matrix, shift);
    r.shift = {s[0] + next.shift[0], s[1] + next.shift[1]};
    return r;
}

ChartTransition ChartTransition::inverse() const {
    const long det = determinant(matrix);
    if (det != 1 && det != -1)
        throw PreconditionError("ChartTransition::inverse: matrix is not unimodular");
    ChartTransition r;
    r.matrix = {{{matrix[1][1] * det, -matrix[0][1] * det},
                 {-matrix[1][0] * det, matrix[0][0] * det}}};
    const auto s = mat_vec(r.matrix, shift);
    r.shift = {-s[0], -s[1]};
    return r;
}

bool ChartTransition::is_identity() const {
    return matrix == IntMatrix{{{1, 0}, {0, 1}}} && shift == IntPoint{0, 0};
}

long determinant(const IntMatrix& m) { return m[0][0] * m[1][1] - m[0][1] * m[1][0]; }
long trace(const IntMatrix& m) { return m[0][0] + m[1][1]; }

bool is_unipotent_nontrivial(const IntMatrix& m) {
    if (trace(m) != 2 || determinant(m) != 1) return false;
    const IntMatrix n{{{m[0][0] - 1, m[0][1]}, {m[1][0], m[1][1] - 1}}};
    const IntMatrix n2 = mul(n, n);
    const bool nilpotent = n2 == IntMatrix{{{0, 0}, {0, 0}}};
    const bool nonzero = n != IntMatrix{{{0, 0}, {0, 0}}};
    return nilpotent && nonzero;
}

LatticeChart fit_local_chart(const PointIndex& index, Point center, double radius, double h,
                             double max_residual, double max_condition) {
    if (!(h > 0) || !(radius > 0)) throw ConfigError("fit_local_chart: h and radius must be positive");
    const auto& pts = index.points();
    const auto disc = index.within(center, radius);
    if (disc.size() < 6)
        throw FitError("fit_local_chart: fewer than 6 eigenvalues in the chart disc", 0.0);

    // Basis from the two shortest independent difference vectors at the most central point.
    std::size_t p0 = disc.front();
    for (std::size_t i : disc)
        if (dist(pts[i], center) < dist(pts[p0], center)) p0 = i;
    std::vector<std::pair<double, std::size_t>> near;
    for (std::size_t i : index.within(pts[p0], radius))
        if (i != p0) near.emplace_back(dist(pts[i], pts[p0]), i);
    std::sort(near.begin(), near.end());
    if (near.size() < 2) throw FitError("fit_local_chart: isolated centre point", 0.0);
    const Eigen::Vector2d v1(pts[near[0].second].E1 - pts[p0].E1, pts[near[0].second].E2 - pts[p0].E2);
    Eigen::Vector2d v2 = Eigen::Vector2d::Zero();
    for (std::size_t j = 1; j < near.size(); ++j) {
        const Eigen::Vector2d v(pts[near[j].second].E1 - pts[p0].E1,
                                pts[near[j].second].E2 - pts[p0].E2);
        const double s = (v1(0) * v(1) - v1(1) * v(0)) / (v1.norm() * v.norm());
        if (std::abs(s) > 0.5) {
            v2 = s > 0 ? v : Eigen::Vector2d(-v);
            break;
        }
    }
    if (v2.isZero()) throw FitError("fit_local_chart: no independent neighbour direction", 0.0);

    Eigen::Matrix2d B;
    B.col(0) = v1 / h;
    B.col(1) = v2 / h;
    Eigen::Matrix2d A = B.inverse();
    Eigen::Vector2d c = -A * Eigen::Vector2d(pts[p0].E1 - center.E1, pts[p0].E2 - center.E2) / h;

    std::vector<Eigen::Vector2d> source, labels;
    double residual = 0;
    for (int iter = 0; iter < 4; ++iter) {
        source.clear();
        labels.clear();
        for (std::size_t i : disc) {
            const Eigen::Vector2d u((pts[i].E1 - center.E1) / h, (pts[i].E2 - center.E2) / h);
            const Eigen::Vector2d y = A * u + c;
            source.push_back(u);
            labels.emplace_back(std::round(y(0)), std::round(y(1)));
        }
        const auto fit = affine_lsq(source, labels);
        A = fit.A;
        c = fit.c;
    }
    // Shift labels so the most central point is the origin of this chart.
    {
        const Eigen::Vector2d u0((pts[p0].E1 - center.E1) / h, (pts[p0].E2 - center.E2) / h);
        const Eigen::Vector2d y0 = A * u0 + c;
        c -= Eigen::Vector2d(std::round(y0(0)), std::round(y0(1)));
    }
    std::set<std::pair<long, long>> seen;
    for (std::size_t i = 0; i < source.size(); ++i) {
        const Eigen::Vector2d y = A * source[i] + c;
        const Eigen::Vector2d r(std::round(y(0)), std::round(y(1)));
        residual = std::max(residual, (y - r).cwiseAbs().maxCoeff());
        if (!seen.insert({static_cast<long>(r(0)), static_cast<long>(r(1))}).second)
            residual = std::max(residual, 0.5);  // two eigenvalues on one label
    }
    if (residual > max_residual)
        throw FitError("fit_local_chart: residual " + std::to_string(residual) +
                           " exceeds the chart tolerance",
                       residual);
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(A);
    const double cond = svd.singularValues()(0) / svd.singularValues()(1);
    if (!(cond < max_condition))
        throw FitError("fit_local_chart: ill-conditioned chart", residual);

    LatticeChart chart;
    chart.center = center;
    chart.radius = radius;
    chart.h = h;
    chart.residual = residual;
    // (linear P + offset) / h = A (P - center) / h + c
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) chart.linear[i][j] = A(i, j);
        chart.offset[i] = -(A(i, 0) * center.E1 + A(i, 1) * center.E2) + h * c(i);
    }
    return chart;
}

ChartTransition chart_transition(const LatticeChart& a, const LatticeChart& b,
                                 const PointIndex& index, double rounding) {
    const auto& pts = index.points();
    std::vector<Eigen::Vector2d> la, lb;
    for (std::size_t i : index.within(a.center, a.radius)) {
        if (!b.covers(pts[i])) continue;
        const auto x = a.label(pts[i]);
        const auto y = b.label(pts[i]);
        la.emplace_back(static_cast<double>(x[0]), static_cast<double>(x[1]));
        lb.emplace_back(static_cast<double>(y[0]), static_cast<double>(y[1]));
    }
    if (la.size() < 6)
        throw GluingError("chart_transition: fewer than 6 eigenvalues in the chart overlap", 0.0);
    const auto fit = affine_lsq(la, lb);
    ChartTransition t;
    double err = 0;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            t.matrix[i][j] = lround_checked(fit.A(i, j));
            err = std::max(err, std::abs(fit.A(i, j) - static_cast<double>(t.matrix[i][j])));
        }
        t.shift[i] = lround_checked(fit.c(i));
        err = std::max(err, std::abs(fit.c(i) - static_cast<double>(t.shift[i])));
    }
    if (err > rounding)
        throw GluingError("chart_transition: transition is not integer-affine (rounding error " +
                              std::to_string(err) + ")",
                          err);
    const long det = determinant(t.matrix);
    if (det != 1 && det != -1)
        throw GluingError("chart_transition: transition matrix is not unimodular", err);
    for (std::size_t i = 0; i < la.size(); ++i) {
        const auto y = t({static_cast<long>(la[i](0)), static_cast<long>(la[i](1))});
        if (y[0] != static_cast<long>(lb[i](0)) || y[1] != static_cast<long>(lb[i](1)))
            throw GluingError("chart_transition: labels disagree on the overlap", 1.0);
    }
    return t;
}

std::pair<LatticeChart, ChartTransition> transport_chart(const LatticeChart& chart, Point new_center,
                                                         const PointIndex& index, double rounding,
                                                         double max_residual) {
    LatticeChart fresh = fit_local_chart(index, new_center, chart.radius, chart.h, max_residual);
    // old labels = t(fresh labels)
    const ChartTransition t = chart_transition(fresh, chart, index, rounding);
    LatticeChart corrected = fresh;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j)
            corrected.linear[i][j] = static_cast<double>(t.matrix[i][0]) * fresh.linear[0][j] +
                                     static_cast<double>(t.matrix[i][1]) * fresh.linear[1][j];
        corrected.offset[i] = static_cast<double>(t.matrix[i][0]) * fresh.offset[0] +
                              static_cast<double>(t.matrix[i][1]) * fresh.offset[1] +
                              fresh.h * static_cast<double>(t.shift[i]);
    }
    return {corrected, t};
}

// ---------------------------------------------------------------------------------------
// Atlas

Atlas::Atlas(std::vector<Point> points, AtlasConfig config)
    : points_(std::move(points)),
      config_(config),
      index_(points_, config.h > 0 ? config.h : 1.0) {
    if (!(config_.h > 0)) throw ConfigError("Atlas: h must be positive");
    if (!(config_.rho_in > 0) || !(config_.rho_out > config_.rho_in))
        throw ConfigError("Atlas: need 0 < rho_in < rho_out");
    if (config_.chart_radius == 0) {
        // Size the discs from the mean density in the annulus so that each holds about
        // 16 eigenvalues: enough for a stable fit, small enough to keep curvature low.
        std::size_t inside = 0;
        for (const Point& p : points_)
            if (in_annulus(p)) ++inside;
        if (inside == 0) throw ConfigError("Atlas: no eigenvalues in the annulus");
        const double area = std::numbers::pi * (config_.rho_out * config_.rho_out -
                                                config_.rho_in * config_.rho_in);
        config_.chart_radius = std::sqrt(16.0 * area / (std::numbers::pi * static_cast<double>(inside)));
    }
    const double R = config_.chart_radius;
    if (config_.rho_in < R) throw ConfigError("Atlas: chart discs would reach the critical value");

    // Neighbouring centres sit R / 2 apart so every overlap holds a good share of a disc.
    const double spacing = 0.5 * R;
    rings_ = static_cast<int>(std::ceil((config_.rho_out - config_.rho_in) / spacing)) + 1;
    sectors_ = std::max(8, static_cast<int>(std::ceil(two_pi * config_.rho_out / spacing)));
    for (int j = 0; j < rings_; ++j)
        ring_radius_.push_back(config_.rho_in +
                               (config_.rho_out - config_.rho_in) * j / (rings_ - 1));
    auto center = [&](int j, int k) {
        const double a = config_.cut_angle + two_pi * (k + 0.5) / sectors_;
        return Point{ring_radius_[j] * std::cos(a), ring_radius_[j] * std::sin(a)};
    };

    charts_.assign(static_cast<std::size_t>(rings_ * sectors_), LatticeChart{});
    auto at = [&](int j, int k) -> LatticeChart& { return charts_[static_cast<std::size_t>(j * sectors_ + k)]; };
    const int j0 = rings_ / 2;
    at(j0, 0) = fit_local_chart(index_, center(j0, 0), R, config_.h, config_.max_residual);
    for (int k = 1; k < sectors_; ++k) {
        auto [c, t] = transport_chart(at(j0, k - 1), center(j0, k), index_, config_.rounding,
                                      config_.max_residual);
        at(j0, k) = c;
        transitions_.push_back(t);
    }
    auto [closing, t_close] = transport_chart(at(j0, sectors_ - 1), center(j0, 0), index_,
                                              config_.rounding, config_.max_residual);
    transitions_.push_back(t_close);
    monodromy_ = chart_transition(at(j0, 0), closing, index_, config_.rounding);

    for (int k = 0; k < sectors_; ++k) {
        for (int j = j0 + 1; j < rings_; ++j)
            at(j, k) = transport_chart(at(j - 1, k), center(j, k), index_, config_.rounding,
                                       config_.max_residual).first;
        for (int j = j0 - 1; j >= 0; --j)
            at(j, k) = transport_chart(at(j + 1, k), center(j, k), index_, config_.rounding,
                                       config_.max_residual).first;
    }
    // Charts reached along different spokes must agree, and the seam must carry the monodromy.
    const ChartTransition seam = monodromy_.inverse();
    for (int j = 0; j < rings_; ++j)
        for (int k = 0; k < sectors_; ++k) {
            const int k1 = (k + 1) % sectors_;
            const auto t = chart_transition(at(j, k), at(j, k1), index_, config_.rounding);
            const bool ok = (k1 == 0) ? (t.matrix == seam.matrix && t.shift == seam.shift)
                                      : t.is_identity();
            if (!ok) throw GluingError("Atlas: inconsistent gluing between neighbouring charts", 1.0);
        }
}

double Atlas::radius(Point p) const { return std::hypot(p.E1, p.E2); }

bool Atlas::in_annulus(Point p) const {
    const double r = radius(p);
    return r >= config_.rho_in && r <= config_.rho_out;
}

double Atlas::relative_angle(Point p) const {
    double a = std::fmod(std::atan2(p.E2, p.E1) - config_.cut_angle, two_pi);
    if (a < 0) a += two_pi;
    if (a >= two_pi) a -= two_pi;
    return a;
}

const LatticeChart& Atlas::chart_for(Point p) const {
    const int k = std::min(sectors_ - 1, static_cast<int>(relative_angle(p) / two_pi * sectors_));
    const double r = radius(p);
    int j = 0;
    for (int i = 1; i < rings_; ++i)
        if (std::abs(ring_radius_[i] - r) < std::abs(ring_radius_[j] - r)) j = i;
    return charts_[static_cast<std::size_t>(j * sectors_ + k)];
}

IntPoint Atlas::label(Point p, long lap) const {
    IntPoint l = chart_for(p).label(p);
    const ChartTransition step = lap >= 0 ? monodromy_ : monodromy_.inverse();
    for (long i = 0; i < std::abs(lap); ++i) l = step(l);
    return l;
}

// ---------------------------------------------------------------------------------------
// Polygons

Unwinding unwind(const SpectrumPolygon& polygon, const Atlas& atlas) {
    const auto& pts = atlas.points();
    if (polygon.vertices.size() < 3) throw PreconditionError("unwind: polygon needs at least 3 vertices");
    for (std::size_t v : polygon.vertices) {
        if (v >= pts.size()) throw PreconditionError("unwind: vertex index out of range");
        if (!atlas.in_annulus(pts[v])) throw PreconditionError("unwind: vertex outside the charted annulus");
    }
    Unwinding u;
    u.monodromy = atlas.monodromy();
    double a = atlas.relative_angle(pts[polygon.vertices[0]]);
    auto push = [&](std::size_t v, double angle) {
        const long lap = static_cast<long>(std::floor(angle / two_pi));
        u.vertices.push_back(atlas.label(pts[v], lap));
        u.unwrapped_angle.push_back(angle);
    };
    push(polygon.vertices[0], a);
    const std::size_t m = polygon.vertices.size();
    for (std::size_t i = 1; i <= m; ++i) {
        const Point p = pts[polygon.vertices[i - 1]];
        const Point q = pts[polygon.vertices[i % m]];
        const double step = wrap_pi(std::atan2(q.E2, q.E1) - std::atan2(p.E2, p.E1));
        if (std::abs(step) >= 0.5 * two_pi - 1e-9)
            throw PreconditionError("unwind: an edge subtends pi or more at the critical value");
        a += step;
        push(polygon.vertices[i % m], a);
    }
    u.turns = std::lround((u.unwrapped_angle.back() - u.unwrapped_angle.front()) / two_pi);
    u.closed = u.vertices.back() == u.vertices.front();
    return u;
}

std::vector<std::size_t> l0_line(const Atlas& atlas) {
    std::vector<std::size_t> out;
    const auto& pts = atlas.points();
    for (std::size_t i = 0; i < pts.size(); ++i)
        if (atlas.in_annulus(pts[i]) && atlas.label(pts[i], 1) == atlas.label(pts[i], 0))
            out.push_back(i);
    return out;
}

long pick_count(std::vector<IntPoint> v) {
    v.erase(std::unique(v.begin(), v.end()), v.end());
    while (v.size() > 1 && v.back() == v.front()) v.pop_back();
    const std::size_t m = v.size();
    if (m < 3) throw PreconditionError("pick_count: polygon needs 3 distinct vertices");
    for (std::size_t i = 0; i < m; ++i) {
        const IntPoint a = v[i], b = v[(i + 1) % m];
        for (std::size_t j = i + 1; j < m; ++j) {
            const IntPoint c = v[j], d = v[(j + 1) % m];
            const bool next = j == i + 1;
            const bool prev = (j + 1) % m == i;
            if (next || prev) {
                // Adjacent edges share one vertex; they must not fold back onto each other.
                const IntPoint shared = next ? b : a;
                const IntPoint other1 = next ? a : b;
                const IntPoint other2 = next ? d : c;
                if (cross(shared, other1, other2) == 0) {
                    const i128 dot = static_cast<i128>(other1[0] - shared[0]) * (other2[0] - shared[0]) +
                                     static_cast<i128>(other1[1] - shared[1]) * (other2[1] - shared[1]);
                    if (dot > 0) throw PreconditionError("pick_count: polygon folds back on itself");
                }
                continue;
            }
            if (segments_intersect(a, b, c, d))
                throw PreconditionError("pick_count: polygon is not simple");
        }
    }
    i128 area2 = 0;
    long boundary = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const IntPoint a = v[i], b = v[(i + 1) % m];
        area2 += static_cast<i128>(a[0]) * b[1] - static_cast<i128>(b[0]) * a[1];
        boundary += std::gcd(std::abs(b[0] - a[0]), std::abs(b[1] - a[1]));
    }
    if (area2 == 0) throw PreconditionError("pick_count: degenerate polygon");
    area2 = area2 < 0 ? -area2 : area2;
    return static_cast<long>((area2 + boundary) / 2 + 1);
}

bool contains(const std::vector<IntPoint>& poly, IntPoint p) {
    const std::size_t m = poly.size();
    int winding = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const IntPoint a = poly[i], b = poly[(i + 1) % m];
        if (on_segment(a, b, p)) return true;
        if (a[1] <= p[1]) {
            if (b[1] > p[1] && cross(a, b, p) > 0) ++winding;
        } else if (b[1] <= p[1] && cross(a, b, p) < 0) {
            --winding;
        }
    }
    return winding != 0;
}

Counts count_in_polygon(const SpectrumPolygon& polygon, const Atlas& atlas) {
    const Unwinding u = unwind(polygon, atlas);
    const auto& pts = atlas.points();
    if (std::abs(u.turns) > 1) throw PreconditionError("count_in_polygon: polygon winds more than once");
    const bool enclosing = u.turns != 0;
    if (enclosing) {
        const IntPoint l = u.vertices.front();
        if (u.monodromy(l) != l)
            throw PreconditionError("count_in_polygon: an enclosing polygon must start on L0");
    }
    if (!u.closed) throw PreconditionError("count_in_polygon: unwound polygon does not close");

    std::vector<IntPoint> poly(u.vertices.begin(), u.vertices.end() - 1);
    Counts counts;
    counts.pick = pick_count(poly);

    const double amin = *std::min_element(u.unwrapped_angle.begin(), u.unwrapped_angle.end());
    const double amax = *std::max_element(u.unwrapped_angle.begin(), u.unwrapped_angle.end());
    if (!enclosing && amax - amin >= two_pi)
        throw PreconditionError("count_in_polygon: polygon spans a full turn without enclosing");
    const double lo = enclosing ? std::min(u.unwrapped_angle.front(), u.unwrapped_angle.back()) : amin;
    const double hi = enclosing ? lo + two_pi : amax;

    // Every lattice point of every unwound edge must be the label of an annulus eigenvalue,
    // otherwise the edge has left the region where the unwinding is defined.
    constexpr double margin = 0.35;
    std::set<IntPoint> present;
    for (const Point& p : pts) {
        if (!atlas.in_annulus(p)) continue;
        const double alpha = atlas.relative_angle(p);
        for (long lap = static_cast<long>(std::floor((lo - margin - alpha) / two_pi));
             alpha + two_pi * lap <= hi + margin; ++lap)
            if (alpha + two_pi * lap >= lo - margin) present.insert(atlas.label(p, lap));
    }
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const IntPoint a = poly[i], b = poly[(i + 1) % poly.size()];
        const long g = std::gcd(std::abs(b[0] - a[0]), std::abs(b[1] - a[1]));
        for (long s = 0; s <= g; ++s) {
            const IntPoint q{a[0] + s * (b[0] - a[0]) / g, a[1] + s * (b[1] - a[1]) / g};
            if (!present.count(q))
                throw PreconditionError("count_in_polygon: an unwound edge leaves the charted annulus");
        }
    }

    const double rim = atlas.config().rho_in + atlas.config().chart_radius;
    for (const Point& p : pts) {
        if (atlas.radius(p) < atlas.config().rho_in) {
            if (enclosing) ++counts.inner;
            continue;
        }
        if (!atlas.in_annulus(p)) continue;
        // Enclosing polygons are cut along L0 at the start vertex, where both sheets agree.
        // Otherwise the sheet is the one nearest the middle of the polygon's angular range,
        // since interior points can lie slightly outside the range spanned by the vertices.
        const double alpha = atlas.relative_angle(p);
        const long lap = enclosing ? static_cast<long>(std::ceil((lo - alpha) / two_pi))
                                   : std::lround((0.5 * (lo + hi) - alpha) / two_pi);
        const bool inside = contains(poly, atlas.label(p, lap));
        // Eigenvalues inside the inner radius have no labels and are counted as inside. That
        // is only sound if the polygon keeps clear of the hole, so the whole inner rim must be
        // inside too.
        if (enclosing && !inside && atlas.radius(p) < rim)
            throw PreconditionError("count_in_polygon: polygon cuts into the inner disc");
        if (inside) ++counts.spec;
    }
    counts.spec += counts.inner;
    return counts;
}

SpectrumPolygon random_enclosing_polygon(const Atlas& atlas, std::mt19937_64& rng) {
    const auto& pts = atlas.points();
    const double rin = atlas.config().rho_in, w = atlas.config().rho_out - rin;
    const double r_lo = rin + 0.35 * w, r_hi = rin + 0.75 * w;
    std::vector<std::size_t> starts;
    for (std::size_t i : l0_line(atlas)) {
        const double r = atlas.radius(pts[i]);
        if (atlas.relative_angle(pts[i]) < 1e-9 && r >= r_lo && r <= r_hi) starts.push_back(i);
    }
    if (starts.empty())
        throw PreconditionError("random_enclosing_polygon: no L0 eigenvalue on the cut ray");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto nearest = [&](double r, double a) {
        const Point target{r * std::cos(a + atlas.config().cut_angle), r * std::sin(a + atlas.config().cut_angle)};
        std::size_t best = 0;
        for (std::size_t i = 1; i < pts.size(); ++i)
            if (dist(pts[i], target) < dist(pts[best], target)) best = i;
        return best;
    };
    SpectrumPolygon poly;
    poly.starts_on_L0 = true;
    poly.vertices.push_back(starts[static_cast<std::size_t>(unit(rng) * static_cast<double>(starts.size())) % starts.size()]);
    const int m = 10 + static_cast<int>(unit(rng) * 5.0) % 5;
    double a = 0;
    for (int i = 1; i < m; ++i) {
        a += two_pi / m * (0.7 + 0.6 * unit(rng));
        if (a > two_pi - 0.3) break;
        const std::size_t v = nearest(r_lo + (r_hi - r_lo) * unit(rng), a);
        if (v != poly.vertices.back()) poly.vertices.push_back(v);
    }
    return poly;
}

nlohmann::json to_json(const LatticeChart& c) {
    return {{"center", {c.center.E1, c.center.E2}},
            {"linear", {{c.linear[0][0], c.linear[0][1]}, {c.linear[1][0], c.linear[1][1]}}},
            {"offset", {c.offset[0], c.offset[1]}},
            {"radius", c.radius},
            {"h", c.h},
            {"residual", c.residual}};
}

nlohmann::json to_json(const ChartTransition& t) {
    return {{"matrix", {{t.matrix[0][0], t.matrix[0][1]}, {t.matrix[1][0], t.matrix[1][1]}}},
            {"shift", {t.shift[0], t.shift[1]}}};
}

}  // namespace champagne::lattice
