#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "champagne/classical_actions.hpp"
#include "champagne/errors.hpp"

using namespace champagne;
using namespace champagne::classical;

namespace {

constexpr double kPi = std::numbers::pi;

// Independent oracle: S_r = 2 int p_r dr in the original variable r, with r = a + (b-a) sin^2(t)
// removing the square-root endpoint behaviour.
double action_oracle(double E, double L) {
    const auto tp = turning_points(E, L);
    const double a = tp.r_minus, b = tp.r_plus;
    auto f = [&](double t) {
        const double r = a + (b - a) * std::pow(std::sin(t), 2);
        const double dr = 2.0 * (b - a) * std::sin(t) * std::cos(t);
        return std::sqrt(std::max(radial_momentum_squared(E, L, r), 0.0)) * dr;
    };
    return 2.0 * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, kPi / 2, 12, 1e-13);
}

}  // namespace

TEST_CASE("turning points") {
    auto tp = turning_points(0.0, 0.0);
    CHECK(tp.r_minus == 0.0);
    CHECK(tp.r_plus == doctest::Approx(1.0).epsilon(1e-15));
    tp = turning_points(-0.2499, 0.0);
    CHECK(std::abs(tp.r_minus - 1 / std::sqrt(2.0)) < 0.01);
    CHECK(std::abs(tp.r_plus - 1 / std::sqrt(2.0)) < 0.01);
    for (double E = -0.2; E <= 0.3; E += 0.05)
        for (double L = -0.3; L <= 0.3; L += 0.0625) {
            if (E == 0.0 && L == 0.0)
                continue;
            try {
                tp = turning_points(E, L);
            } catch (const DomainError&) {
                continue;
            }
            CHECK(std::abs(radial_momentum_squared(E, L, tp.r_plus)) < 1e-10);
            if (L != 0.0)
                CHECK(std::abs(radial_momentum_squared(E, L, tp.r_minus)) < 1e-10);
            CHECK(tp.r_plus > tp.r_minus);
        }
    CHECK(std::abs(radial_momentum_squared(0.1, 0.05, turning_points(0.1, 0.05).r_minus)) < 1e-10);
    CHECK_THROWS_AS(turning_points(-0.3, 0.0), DomainError);
    CHECK_THROWS_AS(turning_points(-0.24, 0.2), DomainError);
}

TEST_CASE("radial action values") {
    CHECK(radial_action(0.0, 0.0).S_r == doctest::Approx(2 * std::sqrt(2.0) / 3).epsilon(1e-12));
    CHECK(std::isinf(radial_action(0.0, 0.0).T));
    double prev = 1.0;
    for (double E : {-0.2, -0.24, -0.249, -0.2499, -0.249999}) {
        const double s = radial_action(E, 0.0).S_r;
        CHECK(s < prev);
        prev = s;
    }
    CHECK(prev < 1e-5);
    // degenerate circular orbit at the bottom of the effective potential
    const auto deg = radial_action(-0.25, 0.0);
    CHECK(deg.degenerate);
    CHECK(deg.S_r == 0.0);
    CHECK(deg.T == doctest::Approx(2 * kPi / 2.0).epsilon(1e-9));
    for (auto [E, L] : {std::pair{0.1, 0.05}, {-0.1, 0.2}, {0.25, -0.3}, {-0.2, 0.0}, {0.2, 0.0}})
        CHECK(radial_action(E, L).S_r == doctest::Approx(action_oracle(E, L)).epsilon(1e-9));
    CHECK(radial_action(0.13, 0.07).S_r == radial_action(0.13, -0.07).S_r);
}

TEST_CASE("period and rotation identities over a grid") {
    const double d = 1e-5;
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j) {
            const double E = -0.15 + 0.04 * i;
            const double L = 0.02 + 0.025 * j;
            if (std::hypot(E, L) < 0.02)
                continue;
            try {
                turning_points(E, L - d);
            } catch (const DomainError&) {
                continue;
            }
            const double T = radial_action(E, L).T;
            const double dSdE = (radial_action(E + d, L).S_r - radial_action(E - d, L).S_r) / (2 * d);
            CHECK(std::abs(dSdE - T) < 1e-4 * T);
            const double theta = rotation_number(E, L);
            const double dSdL = (radial_action(E, L + d).S_r - radial_action(E, L - d).S_r) / (2 * d);
            CHECK(std::abs(-dSdL - theta) < 1e-4 * std::abs(theta));
        }
}

TEST_CASE("rotation number") {
    CHECK(rotation_number(0.1, -0.05) == -rotation_number(0.1, 0.05));
    CHECK(std::abs(rotation_number(0.1, 1e-7) - kPi) < 1e-5);
    CHECK(rotation_number(0.1, 0.0) == kPi);
    CHECK(rotation_number(-0.1, 0.0) == 0.0);
    CHECK(std::abs(rotation_number(-0.1, 1e-8)) < 1e-5);
    CHECK_THROWS_AS(rotation_number(0.0, 0.0), DomainError);
    // closing angle is continuous across E > 0 and jumps by 2 pi across E < 0
    CHECK(std::abs(closing_angle(0.1, 1e-9) - closing_angle(0.1, -1e-9)) < 1e-5);
    CHECK(std::abs(closing_angle(-0.1, 1e-9) - closing_angle(-0.1, -1e-9) - 2 * kPi) < 1e-5);
}

TEST_CASE("rotation winding and classical monodromy") {
    const auto enclosing = circle_loop(0.0, 0.0, 0.05);
    CHECK(std::abs(rotation_winding(enclosing) - 2 * kPi) < 1e-3);
    const auto outside = circle_loop(0.12, 0.05, 0.05);
    CHECK(std::abs(rotation_winding(outside)) < 1e-3);
    const auto m = classical_monodromy(enclosing);
    CHECK(m == IntMatrix{{{1, 0}, {1, 1}}});
    CHECK(classical_monodromy(outside) == IntMatrix{{{1, 0}, {0, 1}}});
    Loop reversed(enclosing.rbegin(), enclosing.rend());
    CHECK(classical_monodromy(reversed) == IntMatrix{{{1, 0}, {-1, 1}}});
    // an off-centre square around the origin
    const Loop square{{0.03, -0.02}, {0.03, 0.04}, {-0.05, 0.04}, {-0.05, -0.02}};
    CHECK(std::abs(rotation_winding(square) - 2 * kPi) < 1e-3);
    CHECK_THROWS_AS(rotation_winding(circle_loop(0.0, 0.0, 5e-5)), DomainError);
    CHECK_THROWS_AS(rotation_winding({{0.01, 0.01}, {-0.01, -0.01}, {0.02, -0.01}}), DomainError);
}

TEST_CASE("regularized action") {
    const double oracle = action_oracle(1e-12, 0.0);
    CHECK(std::abs(oracle - homoclinic_action()) < 1e-6);
    std::vector<double> limits;
    for (double deg : {0.0, 45.0, 90.0, 135.0}) {
        const auto ray = regularized_action_ray(deg * kPi / 180.0);
        limits.push_back(ray.limit);
        CHECK(std::abs(ray.limit - homoclinic_action()) < 1e-4);
    }
    for (double a : limits)
        for (double b : limits)
            CHECK(std::abs(a - b) < 1e-4);
    // without the counterterm the difference quotient grows like |ln rho|
    const auto ray = regularized_action_ray(0.0);
    CHECK(ray.divergence_slope > 0.5);
    const auto diag = regularized_action_ray(kPi / 4);
    CHECK(diag.divergence_slope > 0.3);
    // the regularized quotient stays bounded
    for (std::size_t k = 1; k < ray.rho.size(); ++k)
        CHECK(std::abs(ray.A_reg[k] - ray.limit) / ray.rho[k] < 5.0);
    CHECK_THROWS_AS(regularized_action(0.0, 0.0), DomainError);
}

TEST_CASE("actions CSV") {
    std::ostringstream os;
    write_actions_csv({sample(0.1, 0.05), sample(0.0, 0.0)}, os);
    const std::string text = os.str();
    CHECK(text.rfind("E,L,r_minus,r_plus,S_r,T,Theta,A_reg\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}
