#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include "champagne/errors.hpp"
#include "champagne/radial_spectrum.hpp"

using namespace champagne;
using namespace champagne::radial;

namespace {

DiscretizationConfig oscillator_config(double h, int grid) {
    DiscretizationConfig c;
    c.h = h;
    c.grid_points = grid;
    c.r_max = 12.0 * std::sqrt(h);
    return c;
}

double oscillator_exact(double h, int k, int n) { return h * (2 * k + std::abs(n) + 1); }

}  // namespace

TEST_CASE("tridiagonal kernel reproduces the discrete Dirichlet spectrum") {
    const std::size_t nodes = 500;
    const double length = 2.0, h = 0.3;
    const auto op = dirichlet_laplacian(nodes, length, h);
    const double k = h * h * double((nodes + 1) * (nodes + 1)) / (length * length);
    const auto ev = eigenvalues_below(op, 0.5);
    REQUIRE(!ev.empty());
    CHECK(ev.size() == sturm_count(op, std::nextafter(0.5, 1.0)));
    for (std::size_t j = 0; j < ev.size(); ++j) {
        const double exact_discrete = k * (1 - std::cos(double(j + 1) * std::numbers::pi / double(nodes + 1)));
        CHECK(std::abs(ev[j] - exact_discrete) < 1e-12 * std::max(1.0, exact_discrete) * 4);
        const double continuum = 0.5 * h * h * std::pow(double(j + 1) * std::numbers::pi / length, 2);
        CHECK(std::abs(ev[j] - continuum) < 1e-3 * continuum);
    }
}

TEST_CASE("operator depends on n only through n^2") {
    const auto cfg = oscillator_config(0.1, 512);
    const auto a = build_radial_operator(3, cfg, PotentialSpec::champagne_bottle());
    const auto b = build_radial_operator(-3, cfg, PotentialSpec::champagne_bottle());
    CHECK(a.diag == b.diag);
    CHECK(a.off == b.off);
    const auto osc = build_radial_operator(0, cfg, PotentialSpec::harmonic_test());
    const double delta = cfg.r_max / cfg.grid_points;
    CHECK(osc.diag[0] == doctest::Approx(cfg.h * cfg.h / (delta * delta) + 0.5 * 0.25 * delta * delta));
}

TEST_CASE("stencil is consistent to second order on a smooth function") {
    // u = sqrt(r) f with f = exp(-r^2) r^n; continuum: -(h^2/2)(u'' - (n^2 - 1/4) u / r^2) + V u
    const int n = 2;
    const double h = 0.5;
    auto residual = [&](int grid) {
        DiscretizationConfig c;
        c.h = h;
        c.r_max = 4.0;
        c.grid_points = grid;
        const auto op = build_radial_operator(n, c, PotentialSpec::champagne_bottle());
        const double delta = c.r_max / grid;
        auto u = [&](double r) { return std::sqrt(r) * std::pow(r, n) * std::exp(-r * r); };
        auto upp = [&](double r) {
            const double e = 1e-4;
            return (u(r + e) - 2 * u(r) + u(r - e)) / (e * e);
        };
        double worst = 0;
        for (int j = 1; j + 1 < grid; ++j) {
            const double r = (j + 0.5) * delta;
            if (r < 0.3 || r > 2.0)
                continue;
            const double applied = op.diag[j] * u(r) + op.off[j - 1] * u(r - delta) + op.off[j] * u(r + delta);
            const double exact = -0.5 * h * h * (upp(r) - (n * n - 0.25) * u(r) / (r * r)) +
                                 PotentialSpec::champagne_bottle()(r) * u(r);
            worst = std::max(worst, std::abs(applied - exact));
        }
        return worst;
    };
    const double ratio = residual(200) / residual(400);
    CHECK(ratio > 3.5);
    CHECK(ratio < 4.5);
}

TEST_CASE("two-dimensional oscillator spectrum") {
    const double h = 0.1;
    auto cfg = oscillator_config(h, 8000);
    // the plain stencil reaches 2e-6 relative at k = 4; extrapolation gives the headroom
    cfg.richardson = true;
    const auto ev = line_eigenvalues(2, cfg, PotentialSpec::harmonic_test(), 0.0, 1.5);
    REQUIRE(ev.size() >= 5);
    for (const auto& e : ev)
        CHECK(std::abs(e.value - oscillator_exact(h, int(e.index), 2)) < 1e-6 * oscillator_exact(h, int(e.index), 2));
}

TEST_CASE("second-order convergence for every n") {
    const double h = 0.1;
    for (int n : {0, 1, 4}) {
        auto err = [&](int grid) {
            const auto ev = line_eigenvalues(n, oscillator_config(h, grid), PotentialSpec::harmonic_test(), 0.0, 0.9);
            return std::abs(ev.at(1).value - oscillator_exact(h, 1, n));
        };
        const double ratio = err(1000) / err(2000);
        CHECK(ratio > 3.5);
        CHECK(ratio < 4.5);
    }
}

TEST_CASE("Richardson extrapolation improves the oscillator") {
    auto cfg = oscillator_config(0.1, 1000);
    const auto plain = line_eigenvalues(0, cfg, PotentialSpec::harmonic_test(), 0.0, 1.0);
    cfg.richardson = true;
    const auto rich = line_eigenvalues(0, cfg, PotentialSpec::harmonic_test(), 0.0, 1.0);
    REQUIRE(plain.size() == rich.size());
    for (std::size_t i = 0; i < rich.size(); ++i) {
        const double exact = oscillator_exact(0.1, int(rich[i].index), 0);
        CHECK(std::abs(rich[i].value - exact) < 0.05 * std::abs(plain[i].value - exact) + 1e-13);
    }
}

TEST_CASE("champagne ground state against a refined-grid oracle") {
    const double h = 0.1;
    const auto pot = PotentialSpec::champagne_bottle();
    DiscretizationConfig cfg;
    cfg.h = h;
    cfg.r_max = default_r_max(pot, 0.3, h);
    cfg.grid_points = default_grid_points(h);
    cfg.richardson = true;
    const auto base = line_eigenvalues(0, cfg, pot, -0.25, 0.3);
    DiscretizationConfig fine = cfg;
    fine.grid_points *= 4;
    const auto oracle = line_eigenvalues(0, fine, pot, -0.25, 0.3);
    REQUIRE(!base.empty());
    CHECK(base[0].index == 0);
    CHECK(std::abs(base[0].value - oracle[0].value) < 1e-8);
}

TEST_CASE("joint spectrum invariants") {
    const double h = 0.1;
    const auto pot = PotentialSpec::champagne_bottle();
    DiscretizationConfig cfg;
    cfg.h = h;
    cfg.r_max = default_r_max(pot, 0.3, h);
    cfg.grid_points = 4096;
    const auto table = joint_spectrum(h, {-6, 6}, {-0.25, 0.3}, cfg, pot, 3);
    REQUIRE(!table.eigenvalues.empty());
    for (const auto& e : table.eigenvalues) {
        CHECK(e.E2 == h * e.n);
        CHECK(e.E1 >= -0.25);
        CHECK(e.E1 < 0.3);
    }
    for (int n = 1; n <= 6; ++n) {
        const auto a = table.line(n), b = table.line(-n);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i)
            CHECK(a[i].E1 == b[i].E1);
        for (std::size_t i = 1; i < a.size(); ++i)
            CHECK(a[i].E1 > a[i - 1].E1);
        // Sturm count matches the returned list
        const auto op = build_radial_operator(n, cfg, pot);
        CHECK(sturm_count(op, 0.3) - sturm_count(op, -0.25) == a.size());
    }
    // pairwise distinct
    for (std::size_t i = 0; i < table.eigenvalues.size(); ++i)
        for (std::size_t j = i + 1; j < table.eigenvalues.size(); ++j) {
            const auto& p = table.eigenvalues[i];
            const auto& q = table.eigenvalues[j];
            CHECK(std::hypot(p.E1 - q.E1, p.E2 - q.E2) > 1e-9);
        }
    // worker count does not change the output
    const auto serial = joint_spectrum(h, {-6, 6}, {-0.25, 0.3}, cfg, pot, 1);
    std::ostringstream s1, s2;
    write_spectrum_csv(table, s1);
    write_spectrum_csv(serial, s2);
    CHECK(s1.str() == s2.str());
}

TEST_CASE("truncation insensitivity and check") {
    const double h = 0.05;
    const auto pot = PotentialSpec::champagne_bottle();
    DiscretizationConfig cfg;
    cfg.h = h;
    cfg.r_max = default_r_max(pot, 0.2, h);
    cfg.grid_points = 4096;
    const auto a = line_eigenvalues(1, cfg, pot, -0.25, 0.2);
    DiscretizationConfig wide = cfg;
    wide.r_max *= 1.2;
    wide.grid_points = int(std::lround(cfg.grid_points * 1.2));
    // identical spacing so only the wall position changes
    wide.r_max = wide.grid_points * (cfg.r_max / cfg.grid_points);
    const auto b = line_eigenvalues(1, wide, pot, -0.25, 0.2);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(std::abs(a[i].value - b[i].value) < 1e-10);

    DiscretizationConfig tight = cfg;
    tight.r_max = 1.0;
    CHECK_THROWS_AS(joint_spectrum(h, {0, 1}, {-0.25, 0.2}, tight, pot), ConfigError);
}

TEST_CASE("configuration validation") {
    DiscretizationConfig c;
    c.grid_points = 10;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.grid_points = 100;
    c.h = 2.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_THROWS_AS(PotentialSpec::custom({0.0, 1.0, -1.0}), ConfigError);
    const auto pot = PotentialSpec::champagne_bottle();
    CHECK_THROWS_AS(resolved_config(pot, {-0.2, 0.1}, -1.0, 0.1, false), ConfigError);
    CHECK_THROWS_AS(resolved_config(pot, {-0.2, 0.1}, 0.0, 0.1, false), ConfigError);
    CHECK_THROWS_AS(resolved_config(pot, {-0.2, 0.1}, 0.1, 0.0, false), ConfigError);
    CHECK_THROWS_AS(resolved_config(pot, {0.1, -0.2}, 0.1, 0.1, false), ConfigError);
    CHECK(PotentialSpec::custom({0.0, -1.0, 1.0})(0.5) == PotentialSpec::champagne_bottle()(0.5));
    CHECK(PotentialSpec::champagne_bottle().minimum() == doctest::Approx(-0.25).epsilon(1e-12));
}

TEST_CASE("epsilon coordinates") {
    auto c = to_epsilon_coords(0.0, 0.003, 1e-3);
    CHECK(c.x == 0.0);
    CHECK(c.n == 3);
    c = to_epsilon_coords(std::sqrt(2.0) * 5 * 1e-4, 0.0, 1e-4);
    CHECK(c.x == doctest::Approx(5.0).epsilon(1e-14));
    CHECK(c.n == 0);
    const auto [e1, e2] = from_epsilon_coords(c.x, c.n, 1e-4);
    CHECK(std::abs(e1 - std::sqrt(2.0) * 5e-4) < 1e-14);
    CHECK(e2 == 0.0);
    CHECK_THROWS_AS(to_epsilon_coords(0.0, 0.0015, 1e-3), DomainError);
}

TEST_CASE("CSV round trip") {
    const auto pot = PotentialSpec::champagne_bottle();
    DiscretizationConfig cfg;
    cfg.h = 0.1;
    cfg.r_max = default_r_max(pot, 0.0, 0.1);
    cfg.grid_points = 1024;
    const auto t = joint_spectrum(0.1, {-2, 2}, {-0.25, 0.0}, cfg, pot, 1);
    std::stringstream ss;
    write_spectrum_csv(t, ss);
    CHECK(ss.str().rfind("h,n,k,E1,E2,x\n", 0) == 0);
    const auto back = read_spectrum_csv(ss);
    REQUIRE(back.eigenvalues.size() == t.eigenvalues.size());
    for (std::size_t i = 0; i < t.eigenvalues.size(); ++i) {
        CHECK(back.eigenvalues[i].E1 == t.eigenvalues[i].E1);
        CHECK(back.eigenvalues[i].n == t.eigenvalues[i].n);
    }
}
