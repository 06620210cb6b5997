#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include <Eigen/Dense>

#include "champagne/errors.hpp"
#include "champagne/monodromy_lattice.hpp"

using namespace champagne;
using namespace champagne::lattice;

namespace {

constexpr double kPi = std::numbers::pi;

// Exact affine lattice P = h (B l + s) for integer l in a box.
std::vector<Point> affine_lattice(double h, double b11, double b12, double b21, double b22, int half) {
    std::vector<Point> pts;
    for (int i = -half; i <= half; ++i)
        for (int j = -half; j <= half; ++j)
            pts.push_back({h * (b11 * i + b12 * j + 0.3), h * (b21 * i + b22 * j - 0.2)});
    return pts;
}

// Closed-form focus-focus model. With z = E1 + i E2 the actions are
//   a1 = (Re(z log z) + kappa E1) / (2 pi),  a2 = E2,
// and the "spectrum" is {a1 in h Z, a2 in h Z}. Going once around z = 0 shifts a1 by -E2,
// which is an integer multiple of h on the lattice, so the point set is single-valued while
// the action chart has unipotent monodromy.
struct ModelPoint {
    Point p;
    long n;
};

std::vector<ModelPoint> log_model(double h, double radius, double kappa) {
    std::vector<ModelPoint> out;
    const long nmax = static_cast<long>(radius / h) + 1;
    for (long n = -nmax; n <= nmax; ++n) {
        const double E2 = h * static_cast<double>(n);
        auto a1 = [&](double E1) {
            const double r = std::hypot(E1, E2);
            if (r == 0) return 0.0;
            const double arg = std::atan2(E2, E1);
            return (E1 * std::log(r) - E2 * arg + kappa * E1) / (2 * kPi);
        };
        // a1 is increasing in E1 while log|z| + 1 + kappa > 0; jumps at the branch cut are
        // integer multiples of h, so bisection per interval of the E1 axis is enough.
        const double lo = -radius, hi = radius;
        const double f_lo = a1(lo), f_hi = a1(hi);
        auto solve = [&](double target, double a, double b) {
            for (int it = 0; it < 200; ++it) {
                const double m = 0.5 * (a + b);
                ((a1(m) < target) ? a : b) = m;
            }
            return 0.5 * (a + b);
        };
        if (n == 0) {
            for (long k = static_cast<long>(std::ceil(f_lo / h)); k <= static_cast<long>(std::floor(f_hi / h)); ++k)
                out.push_back({{k == 0 ? 0.0 : solve(h * k, lo, hi), 0.0}, n});
            continue;
        }
        // Away from n = 0 the only discontinuity is on the negative E1 axis, never crossed.
        for (long k = static_cast<long>(std::ceil(f_lo / h)); k <= static_cast<long>(std::floor(f_hi / h)); ++k)
            out.push_back({{solve(h * k, lo, hi), E2}, n});
    }
    return out;
}

// Model actions in units of h with the argument continued over [0, 2 pi), i.e. on the plane
// cut along the positive E1 axis (part of L0, where both sides agree).
std::array<double, 2> model_action(Point p, double h, double kappa) {
    const double r = std::hypot(p.E1, p.E2);
    if (r == 0) return {0.0, 0.0};
    double arg = std::atan2(p.E2, p.E1);
    if (arg < 0) arg += 2 * kPi;
    return {(p.E1 * std::log(r) - p.E2 * arg + kappa * p.E1) / (2 * kPi * h), p.E2 / h};
}

std::vector<Point> points(const std::vector<ModelPoint>& m) {
    std::vector<Point> out;
    for (const auto& x : m) out.push_back(x.p);
    return out;
}

// Brute-force oracle for Pick: enumerate the bounding box with a floating ray-casting test
// and an explicit on-segment check.
bool brute_force_count_point(const std::vector<IntPoint>& poly, IntPoint p) {
    const double x = double(p[0]), y = double(p[1]);
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const double xi = double(poly[i][0]), yi = double(poly[i][1]);
        const double xj = double(poly[j][0]), yj = double(poly[j][1]);
        const double cr = (xj - xi) * (y - yi) - (yj - yi) * (x - xi);
        if (cr == 0 && x >= std::min(xi, xj) && x <= std::max(xi, xj) && y >= std::min(yi, yj) &&
            y <= std::max(yi, yj))
            return true;
        if ((yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi) inside = !inside;
    }
    return inside;
}

long brute_force_count(const std::vector<IntPoint>& poly) {
    long xmin = poly[0][0], xmax = xmin, ymin = poly[0][1], ymax = ymin;
    for (auto& v : poly) {
        xmin = std::min(xmin, v[0]); xmax = std::max(xmax, v[0]);
        ymin = std::min(ymin, v[1]); ymax = std::max(ymax, v[1]);
    }
    long count = 0;
    for (long x = xmin; x <= xmax; ++x)
        for (long y = ymin; y <= ymax; ++y)
            if (brute_force_count_point(poly, {x, y})) ++count;
    return count;
}

// Random star-shaped (hence simple) integer polygon.
std::vector<IntPoint> random_star_polygon(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> nv(3, 12);
    std::uniform_real_distribution<double> U(0, 1);
    const int m = nv(rng);
    std::vector<double> ang;
    for (int i = 0; i < m; ++i) ang.push_back(2 * kPi * U(rng));
    std::sort(ang.begin(), ang.end());
    std::vector<IntPoint> poly;
    for (double a : ang) {
        const double r = 2 + 18 * U(rng);
        const IntPoint p{std::lround(r * std::cos(a)), std::lround(r * std::sin(a))};
        if (poly.empty() || poly.back() != p) poly.push_back(p);
    }
    return poly;
}

bool is_simple(const std::vector<IntPoint>& v) {
    try {
        pick_count(v);
        return true;
    } catch (const PreconditionError&) {
        return false;
    }
}

}  // namespace

TEST_CASE("point index matches a brute-force disc query") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(-1, 1);
    std::vector<Point> pts(2000);
    for (auto& p : pts) p = {U(rng), U(rng)};
    PointIndex index(pts, 0.07);
    for (int t = 0; t < 20; ++t) {
        const Point c{U(rng), U(rng)};
        std::vector<std::size_t> brute;
        for (std::size_t i = 0; i < pts.size(); ++i)
            if (std::hypot(pts[i].E1 - c.E1, pts[i].E2 - c.E2) <= 0.15) brute.push_back(i);
        CHECK(index.within(c, 0.15) == brute);
    }
}

TEST_CASE("chart on an exact affine lattice") {
    const double h = 1e-3;
    const auto pts = affine_lattice(h, 0.8, 0.3, 0.1, 1.0, 12);
    PointIndex index(pts, h);
    const auto chart = fit_local_chart(index, {0.0, 0.0}, 3.5 * h, h);
    CHECK(chart.residual < 1e-9);
    // Every lattice point, even outside the disc, maps to an integer pair.
    for (const auto& p : pts) {
        const auto v = chart(p);
        CHECK(std::abs(v[0] - std::round(v[0])) < 1e-8);
        CHECK(std::abs(v[1] - std::round(v[1])) < 1e-8);
    }
    // Distinct points get distinct labels and the chart preserves orientation.
    std::set<IntPoint> labels;
    for (const auto& p : pts) labels.insert(chart.label(p));
    CHECK(labels.size() == pts.size());
    CHECK(chart.linear[0][0] * chart.linear[1][1] - chart.linear[0][1] * chart.linear[1][0] > 0);
}

TEST_CASE("chart fit rejects sparse, noisy or empty discs") {
    const double h = 1e-3;
    auto pts = affine_lattice(h, 1.0, 0.0, 0.0, 1.0, 10);
    PointIndex index(pts, h);
    CHECK_THROWS_AS(fit_local_chart(index, {0.0, 0.0}, 1.2 * h, h), FitError);
    CHECK_THROWS_AS(fit_local_chart(index, {1.0, 1.0}, 3.0 * h, h), FitError);

    std::mt19937_64 rng(5);
    std::normal_distribution<double> noise(0.0, 0.08 * h);
    for (auto& p : pts) {
        p.E1 += noise(rng);
        p.E2 += noise(rng);
    }
    PointIndex noisy(pts, h);
    try {
        fit_local_chart(noisy, {0.0, 0.0}, 4.0 * h, h);
        FAIL("expected FitError");
    } catch (const FitError& e) {
        CHECK(e.residual() > 0.05);
    }
}

TEST_CASE("transition algebra") {
    ChartTransition a{{{{1, 2}, {0, 1}}}, {3, -1}};
    ChartTransition b{{{{0, -1}, {1, 0}}}, {1, 1}};
    const IntPoint l{4, -7};
    CHECK(a.then(b)(l) == b(a(l)));
    CHECK(a.inverse()(a(l)) == l);
    CHECK(a.then(a.inverse()).is_identity());
    CHECK(is_unipotent_nontrivial({{{1, -1}, {0, 1}}}));
    CHECK(is_unipotent_nontrivial({{{2, 1}, {-1, 0}}}));
    CHECK_FALSE(is_unipotent_nontrivial({{{1, 0}, {0, 1}}}));
    CHECK_FALSE(is_unipotent_nontrivial({{{-1, 0}, {0, -1}}}));
    CHECK_FALSE(is_unipotent_nontrivial({{{2, 1}, {1, 1}}}));
    CHECK(determinant(b.matrix) == 1);
    CHECK(trace(a.matrix) == 2);
}

TEST_CASE("transport around a contractible loop is trivial") {
    const double h = 1e-3;
    const auto pts = affine_lattice(h, 0.7, 0.25, -0.1, 1.0, 30);
    PointIndex index(pts, h);
    const double R = 3.5 * h;
    const LatticeChart start = fit_local_chart(index, {0.0, 0.0}, R, h);
    LatticeChart c = start;
    ChartTransition total;
    const int steps = 12;
    for (int i = 1; i <= steps; ++i) {
        const double a = 2 * kPi * i / steps;
        const Point next{8 * h * (std::cos(a) - 1), 8 * h * std::sin(a)};
        auto [moved, t] = transport_chart(c, next, index);
        c = moved;
        total = t.then(total);
    }
    CHECK(chart_transition(start, c, index).is_identity());
    for (const auto& p : index.within({0.0, 0.0}, R)) CHECK(c.label(pts[p]) == start.label(pts[p]));
}

TEST_CASE("transport reports a gluing failure when the overlap is empty") {
    const double h = 1e-3;
    const auto pts = affine_lattice(h, 1.0, 0.0, 0.0, 1.0, 20);
    PointIndex index(pts, h);
    const auto chart = fit_local_chart(index, {0.0, 0.0}, 3.0 * h, h);
    CHECK_THROWS_AS(transport_chart(chart, {10 * h, 0.0}, index), GluingError);
}

TEST_CASE("focus-focus model: unipotent monodromy and L0") {
    const double h = 5e-3;
    const auto model = log_model(h, 0.4, 8.0);
    Atlas atlas(points(model), {h, 0.2, 0.32});
    const auto& mu = atlas.monodromy();
    CHECK(is_unipotent_nontrivial(mu.matrix));
    for (const auto& c : atlas.charts()) CHECK(c.residual <= 0.05);

    std::set<std::size_t> expected;
    for (std::size_t i = 0; i < model.size(); ++i)
        if (model[i].n == 0 && atlas.in_annulus(model[i].p)) expected.insert(i);
    const auto l0 = l0_line(atlas);
    CHECK(std::set<std::size_t>(l0.begin(), l0.end()) == expected);
    CHECK(!expected.empty());
}

TEST_CASE("focus-focus model: counting theorem on random enclosing polygons") {
    const double h = 5e-3;
    const double kappa = 8.0;
    const auto model = log_model(h, 0.4, kappa);
    const auto pts = points(model);
    const double rin = 0.2, rout = 0.32, w = rout - rin;
    Atlas atlas(pts, {h, rin, rout});

    std::vector<std::size_t> starts;
    for (std::size_t i = 0; i < model.size(); ++i)
        if (model[i].n == 0 && pts[i].E1 > rin + 0.25 * w && pts[i].E1 < rout - 0.25 * w) starts.push_back(i);
    REQUIRE(!starts.empty());
    auto nearest = [&](double r, double a) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < pts.size(); ++i)
            if (std::hypot(pts[i].E1 - r * std::cos(a), pts[i].E2 - r * std::sin(a)) <
                std::hypot(pts[best].E1 - r * std::cos(a), pts[best].E2 - r * std::sin(a)))
                best = i;
        return best;
    };

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0, 1);
    int tested = 0;
    for (int trial = 0; trial < 10; ++trial) {
        SpectrumPolygon poly;
        poly.vertices.push_back(starts[rng() % starts.size()]);
        poly.starts_on_L0 = true;
        const int m = 10 + static_cast<int>(rng() % 5);
        double a = 0;
        for (int i = 1; i < m; ++i) {
            a += 2 * kPi / m * (0.7 + 0.6 * U(rng));
            if (a > 2 * kPi - 0.3) break;
            poly.vertices.push_back(nearest(rin + w * (0.35 + 0.4 * U(rng)), a));
        }
        const auto u = unwind(poly, atlas);
        CHECK(u.turns == 1);
        CHECK(u.closed);
        const auto counts = count_in_polygon(poly, atlas);

        // Oracle without charts: the model's own actions are an injective lattice map on the
        // plane cut along L0. Relate them to the unwound labels through the vertices, move
        // the polygon into action coordinates and count every model point, inner ones included.
        std::vector<IntPoint> up(u.vertices.begin(), u.vertices.end() - 1);
        Eigen::MatrixXd X(static_cast<Eigen::Index>(up.size()), 3), Y(static_cast<Eigen::Index>(up.size()), 2);
        for (std::size_t v = 0; v < up.size(); ++v) {
            const auto a = model_action(pts[poly.vertices[v]], h, kappa);
            X.row(static_cast<Eigen::Index>(v)) << double(up[v][0]), double(up[v][1]), 1.0;
            Y.row(static_cast<Eigen::Index>(v)) << a[0], a[1];
        }
        const Eigen::MatrixXd W = X.colPivHouseholderQr().solve(Y);
        std::vector<IntPoint> action_poly;
        for (const auto& v : up) {
            const Eigen::RowVector2d a = Eigen::RowVector3d(double(v[0]), double(v[1]), 1.0) * W;
            action_poly.push_back({std::lround(a(0)), std::lround(a(1))});
            CHECK(std::abs(a(0) - std::round(a(0))) < 1e-6);
        }
        long oracle = 0;
        for (const auto& p : pts) {
            const auto a = model_action(p, h, kappa);
            const IntPoint q{std::lround(a[0]), std::lround(a[1])};
            if (brute_force_count_point(action_poly, q)) ++oracle;
        }
        CHECK(counts.spec == oracle);
        CHECK(counts.spec == counts.pick);
        CHECK(counts.inner > 0);
        ++tested;
    }
    CHECK(tested == 10);
}

TEST_CASE("enclosing polygon must start on L0") {
    const double h = 5e-3;
    const auto model = log_model(h, 0.4, 8.0);
    const auto pts = points(model);
    Atlas atlas(pts, {h, 0.2, 0.32});
    auto nearest = [&](double r, double a) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < pts.size(); ++i)
            if (std::hypot(pts[i].E1 - r * std::cos(a), pts[i].E2 - r * std::sin(a)) <
                std::hypot(pts[best].E1 - r * std::cos(a), pts[best].E2 - r * std::sin(a)))
                best = i;
        return best;
    };
    SpectrumPolygon poly;
    for (int i = 0; i < 8; ++i) poly.vertices.push_back(nearest(0.26, 0.4 + 2 * kPi * i / 8));
    CHECK(model[poly.vertices[0]].n != 0);
    CHECK_FALSE(unwind(poly, atlas).closed);
    CHECK_THROWS_AS(count_in_polygon(poly, atlas), PreconditionError);
}

TEST_CASE("enclosing polygon that cuts into the inner disc is rejected") {
    const double h = 5e-3;
    const auto model = log_model(h, 0.4, 8.0);
    const auto pts = points(model);
    Atlas atlas(pts, {h, 0.2, 0.32});
    std::size_t start = 0;
    for (std::size_t i = 0; i < model.size(); ++i)
        if (model[i].n == 0 && std::abs(pts[i].E1 - 0.21) < std::abs(pts[start].E1 - 0.21)) start = i;
    auto nearest = [&](double r, double a) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < pts.size(); ++i)
            if (std::hypot(pts[i].E1 - r * std::cos(a), pts[i].E2 - r * std::sin(a)) <
                std::hypot(pts[best].E1 - r * std::cos(a), pts[best].E2 - r * std::sin(a)))
                best = i;
        return best;
    };
    // Five vertices on the inner rim: the chords pass well inside the inner radius.
    SpectrumPolygon poly;
    poly.vertices.push_back(start);
    for (int i = 1; i < 5; ++i) poly.vertices.push_back(nearest(0.21, 2 * kPi * i / 5));
    CHECK_THROWS_AS(count_in_polygon(poly, atlas), PreconditionError);
}

TEST_CASE("polygon in a simply connected patch") {
    const double h = 5e-3;
    const auto model = log_model(h, 0.4, 8.0);
    const auto pts = points(model);
    Atlas atlas(pts, {h, 0.2, 0.32});
    auto nearest = [&](double r, double a) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < pts.size(); ++i)
            if (std::hypot(pts[i].E1 - r * std::cos(a), pts[i].E2 - r * std::sin(a)) <
                std::hypot(pts[best].E1 - r * std::cos(a), pts[best].E2 - r * std::sin(a)))
                best = i;
        return best;
    };
    // A quadrilateral straddling the cut: labels on both sides come from different sheets.
    SpectrumPolygon poly;
    poly.vertices = {nearest(0.23, -0.3), nearest(0.29, -0.25), nearest(0.29, 0.3), nearest(0.23, 0.25)};
    const auto u = unwind(poly, atlas);
    CHECK(u.turns == 0);
    CHECK(u.closed);
    const auto counts = count_in_polygon(poly, atlas);
    CHECK(counts.inner == 0);
    CHECK(counts.spec == counts.pick);
    CHECK(counts.pick > 20);
}

TEST_CASE("Pick count against brute-force enumeration") {
    std::mt19937_64 rng(2024);
    int tested = 0;
    while (tested < 100) {
        auto poly = random_star_polygon(rng);
        if (poly.size() < 3 || !is_simple(poly)) continue;
        CHECK(pick_count(poly) == brute_force_count(poly));
        std::vector<IntPoint> reversed(poly.rbegin(), poly.rend());
        CHECK(pick_count(reversed) == pick_count(poly));
        ++tested;
    }
}

TEST_CASE("Pick count edge cases") {
    CHECK(pick_count({{0, 0}, {1, 0}, {0, 1}}) == 3);
    CHECK(pick_count({{0, 0}, {4, 0}, {4, 3}, {0, 3}}) == 20);
    CHECK(pick_count({{0, 0}, {4, 0}, {4, 3}, {0, 3}, {0, 0}}) == 20);  // explicit closure
    CHECK_THROWS_AS(pick_count({{0, 0}, {1, 1}, {2, 2}}), PreconditionError);
    CHECK_THROWS_AS(pick_count({{0, 0}, {2, 2}, {2, 0}, {0, 2}}), PreconditionError);  // bow tie
    CHECK_THROWS_AS(pick_count({{0, 0}, {1, 0}}), PreconditionError);
    CHECK(contains({{0, 0}, {4, 0}, {4, 3}, {0, 3}}, {4, 1}));
    CHECK(contains({{0, 0}, {4, 0}, {4, 3}, {0, 3}}, {2, 2}));
    CHECK_FALSE(contains({{0, 0}, {4, 0}, {4, 3}, {0, 3}}, {5, 1}));
}

TEST_CASE("JSON output") {
    ChartTransition t{{{{1, -1}, {0, 1}}}, {2, 0}};
    const auto j = to_json(t);
    CHECK(j["matrix"][0][1] == -1);
    CHECK(j["shift"][0] == 2);
}

TEST_CASE("random enclosing polygons start on L0 and satisfy the count") {
    const double h = 5e-3;
    const auto model = log_model(h, 0.4, 8.0);
    Atlas atlas(points(model), {h, 0.2, 0.32});
    std::mt19937_64 rng(99);
    for (int i = 0; i < 5; ++i) {
        const auto poly = random_enclosing_polygon(atlas, rng);
        CHECK(model[poly.vertices.front()].n == 0);
        CHECK(poly.vertices.size() >= 8);
        const auto c = count_in_polygon(poly, atlas);
        CHECK(c.spec == c.pick);
    }
}
