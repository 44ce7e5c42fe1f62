#include "doctest.h"

#include "../oracles.hpp"
#include "seeker/astro.hpp"
#include "seeker/random.hpp"

#include <cmath>
#include <random>

using namespace seeker;
using namespace seeker::astro;

TEST_SUITE("astro") {

TEST_CASE("circular equatorial elements give the textbook state") {
    const auto sv = kepler_to_cartesian({42164.0, 0.0, 0.0, 0.0, 0.0, 0.0});
    CHECK((sv.position - Vec3(42164.0, 0.0, 0.0)).norm() < 1e-9);
    CHECK((sv.velocity - Vec3(0.0, std::sqrt(kMu / 42164.0), 0.0)).norm() < 1e-12);

    const auto el = cartesian_to_kepler(sv);
    CHECK(el.a == doctest::Approx(42164.0).epsilon(1e-12));
    CHECK(el.e < 1e-12);
    CHECK(el.raan == 0.0);
    CHECK(el.argp == 0.0);
}

TEST_CASE("radius follows the conic equation") {
    const KeplerianElements el{42164.0, 0.35, 0.3 * kDeg, 10.0 * kDeg, 20.0 * kDeg, 135.0 * kDeg};
    const auto sv = kepler_to_cartesian(el);
    const double r = el.a * (1.0 - el.e * el.e) / (1.0 + el.e * std::cos(el.true_anomaly));
    CHECK(sv.position.norm() == doctest::Approx(r).epsilon(1e-12));
}

TEST_CASE("invalid elements are rejected") {
    CHECK_THROWS_AS(kepler_to_cartesian({42164.0, 1.2, 0, 0, 0, 0}), InvalidInput);
    CHECK_THROWS_AS(kepler_to_cartesian({-1.0, 0.1, 0, 0, 0, 0}), InvalidInput);
    CHECK_THROWS_AS(solve_kepler(1.0, 1.0), InvalidInput);
}

TEST_CASE("element round trip and independent eccentricity-vector check") {
    Rng rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
        const KeplerianElements el{7000.0 + 40000.0 * u(rng), 0.01 + 0.8 * u(rng), 0.05 + 3.0 * u(rng),
                                   kTwoPi * u(rng), kTwoPi * u(rng), kTwoPi * u(rng)};
        const auto sv = kepler_to_cartesian(el);
        const auto back = cartesian_to_kepler(sv);
        CHECK(back.a == doctest::Approx(el.a).epsilon(1e-9));
        CHECK(back.e == doctest::Approx(el.e).epsilon(1e-9));
        CHECK(std::abs(back.i - el.i) < 1e-9);
        CHECK(std::abs(wrap_pi(back.raan - el.raan)) < 1e-8);
        CHECK(std::abs(wrap_pi(back.argp - el.argp)) < 1e-8);
        CHECK(std::abs(wrap_pi(back.true_anomaly - el.true_anomaly)) < 1e-8);

        const Vec3 r = sv.position, v = sv.velocity;
        const Vec3 evec = ((v.squaredNorm() - kMu / r.norm()) * r - r.dot(v) * v) / kMu;
        const double energy = 0.5 * v.squaredNorm() - kMu / r.norm();
        CHECK(evec.norm() == doctest::Approx(el.e).epsilon(1e-9));
        CHECK(-kMu / (2.0 * energy) == doctest::Approx(el.a).epsilon(1e-9));

        const auto shape = orbit_shape(sv);
        CHECK(shape.a == doctest::Approx(el.a).epsilon(1e-9));
        CHECK(shape.periapsis() == doctest::Approx(el.a * (1.0 - el.e)).epsilon(1e-9));
    }
}

TEST_CASE("Kepler equation") {
    CHECK(solve_kepler(1.234, 0.0) == doctest::Approx(1.234).epsilon(1e-15));
    for (double e : {0.1, 0.5, 0.66, 0.95, 0.999}) {
        for (double m = -6.0; m < 6.0; m += 0.37) {
            const double big_e = solve_kepler(m, e);
            CHECK(std::abs(std::remainder(big_e - e * std::sin(big_e) - m, kTwoPi)) < 1e-12);
        }
    }
}

TEST_CASE("one period returns the initial state") {
    const double a = 42164.0;
    const auto sv = kepler_to_cartesian({a, 0.0, 0.0, 0.0, 0.0, 0.0});
    const double period = kTwoPi * std::sqrt(a * a * a / kMu);
    const auto back = propagate_two_body(sv, period);
    CHECK((back.position - sv.position).norm() < 1e-6);
    CHECK(propagate_two_body(sv, 0.0).stacked() == sv.stacked());
}

TEST_CASE("propagation matches RK4 integration for the eccentric case") {
    const auto sv = kepler_to_cartesian({25447.5, 0.66, 1.0 * kDeg, 0.001 * kDeg, 0.001 * kDeg, 240.0 * kDeg});
    Rng rng(3);
    std::uniform_real_distribution<double> u(-20000.0, 20000.0);
    for (int t = 0; t < 5; ++t) {
        const double dt = u(rng);
        const Vec6 ref = oracle::rk4_two_body(sv.stacked(), dt, 200000);
        const auto got = propagate_two_body(sv, dt);
        CHECK((got.position - ref.head<3>()).norm() < 1e-6);
        CHECK((got.velocity - ref.tail<3>()).norm() < 1e-9);
    }
}

TEST_CASE("unbound states propagate on the universal-variable branch") {
    StateVector sv{Vec3(7000.0, 0.0, 0.0), Vec3(0.0, 11.5, 1.0)};
    REQUIRE(orbit_shape(sv).a < 0.0);
    for (double dt : {600.0, -900.0, 3000.0}) {
        const Vec6 ref = oracle::rk4_two_body(sv.stacked(), dt, 400000);
        const auto got = propagate_two_body(sv, dt);
        CHECK((got.position - ref.head<3>()).norm() < 1e-6);
    }
}

TEST_CASE("observer site kinematics") {
    const auto s0 = site_state({0.0, 0.0, 0.0}, Epoch{0.0});
    CHECK((s0.position - Vec3(kEarthRadius, 0.0, 0.0)).norm() < 1e-9);
    CHECK((s0.velocity - Vec3(0.0, kEarthRate * kEarthRadius, 0.0)).norm() < 1e-12);

    const auto pole = site_state({90.0, 0.0, 0.0}, Epoch{1234.0});
    CHECK(pole.velocity.norm() < 1e-12);

    const ObserverSite site{34.0584, -106.8914, 1.2};
    const auto a = site_state(site, Epoch{0.0}, 0.7);
    const auto b = site_state(site, Epoch{0.7 / kEarthRate}, 0.0);
    CHECK((a.position - b.position).norm() < 1e-9);
    CHECK(a.position.norm() == doctest::Approx(kEarthRadius + 1.2).epsilon(1e-12));
    CHECK(std::abs(a.velocity.dot(a.position)) < 1e-9);
}

TEST_CASE("angles from simple geometry") {
    const auto m = measure_radec(Vec3(8000.0, 0.0, 0.0), Vec3(7000.0, 0.0, 0.0));
    CHECK(m.ra == 0.0);
    CHECK(m.dec == 0.0);
    const auto up = measure_radec(Vec3(7000.0, 0.0, 5000.0), Vec3(7000.0, 0.0, 0.0));
    CHECK(up.dec == doctest::Approx(kPi / 2));
    CHECK(up.ra == 0.0);
    const auto west = measure_radec(Vec3(0.0, -1.0, 0.0), Vec3(0.0, 0.0, 0.0));
    CHECK(west.ra == doctest::Approx(1.5 * kPi));
    CHECK_THROWS_AS(measure_radec(Vec3(1.0, 2.0, 3.0), Vec3(1.0, 2.0, 3.0)), InvalidInput);
}

TEST_CASE("measurement Jacobian matches finite differences") {
    Rng rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        const Vec3 obs = Vec3(n(rng), n(rng), n(rng)).normalized() * kEarthRadius;
        Vec3 dir(n(rng), n(rng), n(rng));
        dir.z() *= 0.5;
        const Vec3 target = obs + dir.normalized() * (500.0 + 40000.0 * std::abs(n(rng)));
        const Mat26 j = measurement_jacobian(target, obs);
        const auto fd = oracle::radec_jacobian_fd(target, obs, 1e-6);
        CHECK((j.leftCols<3>() - fd).norm() <= 1e-6 * fd.norm());
        CHECK(j.rightCols<3>().norm() == 0.0);
        const auto m = measure_radec(target, obs);
        CHECK((m.vec() - oracle::radec(target, obs)).norm() < 1e-14);
    }
}

TEST_CASE("angle wrapping") {
    CHECK(wrap_two_pi(-0.5) == doctest::Approx(kTwoPi - 0.5));
    CHECK(wrap_two_pi(kTwoPi) == doctest::Approx(0.0));
    CHECK(wrap_pi(kPi + 0.25) == doctest::Approx(-kPi + 0.25));
    CHECK(wrap_pi(-0.25) == doctest::Approx(-0.25));
}

}
