#include "doctest.h"

#include "../oracles.hpp"
#include "seeker/kernels.hpp"
#include "seeker/reward.hpp"

#include <cmath>
#include <numeric>
#include <random>

using namespace seeker;
using namespace seeker::reward;

namespace {

struct Scene {
    astro::StateVector observer;
    Vec6 target;
    Mat6 cov;
    Mat2 noise;
    gmm::FovRect fov;
};

Scene scene() {
    Scene s;
    s.observer = astro::site_state({20.7, -156.3, 0.0}, astro::Epoch{0.0}, 0.0);
    s.target = astro::kepler_to_cartesian({42164.0, 0.0, 0.0, 0.0, 0.0, -150.0 * kDeg}).stacked();
    Vec6 sd;
    sd << 20.0, 20.0, 20.0, 0.002, 0.002, 0.002;
    s.cov = sd.cwiseProduct(sd).asDiagonal();
    s.noise = Mat2::Identity() * std::pow(3.0 * kArcsec, 2);
    const auto z = astro::measure_radec(Vec3(s.target.head<3>()), s.observer.position);
    s.fov = gmm::FovRect(z.vec(), 3.0 * kDeg, 3.0 * kDeg);
    return s;
}

cphd::CphdState state_of(const Scene& s, double w, cphd::CardinalityPmf card) {
    cphd::CphdState st{gmm::GaussianMixture(6), std::move(card)};
    st.intensity.add({w, s.target, s.cov});
    return st;
}

// Context around a hand-built cloud; mirrors what prepare_reward_context fills in.
RewardContext context_for(ParticleCloud cloud, std::size_t ell, const Scene& s, double p_d,
                          cphd::CardinalityPmf prior, const cphd::ClutterModel& clutter = {}) {
    RewardContext ctx;
    ctx.cloud = std::move(cloud);
    project_particles(ctx.cloud, s.observer);
    ctx.knn = build_knn(ctx.cloud, ell);
    ctx.clutter = clutter_measurement_model(clutter, s.observer, s.noise);
    ctx.prior_cardinality = std::move(prior);
    ctx.noise = s.noise;
    ctx.noise_chol = Eigen::LLT<Mat2>(s.noise).matrixL();
    ctx.noise_inv = s.noise.inverse();
    ctx.noise_log_norm = -std::log(kTwoPi) - 0.5 * std::log(s.noise.determinant());
    ctx.p_d = p_d;
    ctx.reverse_neighbors.assign(ctx.cloud.size(), {});
    for (std::size_t i = 0; i < ctx.cloud.size(); ++i)
        for (auto j : ctx.knn.of(i)) ctx.reverse_neighbors[j].push_back(static_cast<std::uint32_t>(i));
    return ctx;
}

ParticleCloud cloud_at(std::vector<Vec6> states, double expected) {
    ParticleCloud c;
    c.prior_weights.assign(states.size(), 1.0 / static_cast<double>(states.size()));
    c.states = std::move(states);
    c.expected_count = expected;
    return c;
}

}  // namespace

TEST_SUITE("reward") {

TEST_CASE("particle sampling") {
    const auto s = scene();
    const auto st = state_of(s, 1.0, cphd::CardinalityPmf::point(1));
    Rng a(5), b(5);
    const auto c1 = sample_particles(st.intensity, 10000, a);
    const auto c2 = sample_particles(st.intensity, 10000, b);
    CHECK(c1.states == c2.states);
    Vec6 mean = Vec6::Zero();
    for (const auto& x : c1.states) mean += x;
    mean /= 10000.0;
    for (int d = 0; d < 6; ++d) CHECK(std::abs(mean(d) - s.target(d)) < 4.0 * std::sqrt(s.cov(d, d)) / 100.0);

    gmm::GaussianMixture two(6);
    two.add({1.0, s.target, s.cov});
    two.add({0.0, s.target + Vec6::Constant(1e6), s.cov});
    Rng r(6);
    for (const auto& x : sample_particles(two, 1000, r).states) CHECK((x - s.target).norm() < 1e3);
    CHECK_THROWS_AS(sample_particles(gmm::GaussianMixture(6), 10, r), InvalidInput);
}

TEST_CASE("nearest neighbors") {
    std::vector<Vec6> line(3, Vec6::Zero());
    line[1](0) = 1.0;
    line[2](0) = 3.0;
    const auto t = kernels::knn_serial(line, 2);
    CHECK(t.neighbors[2] == 1);
    CHECK(t.neighbors[3] == 0);
    CHECK(t.radius[1] == 1.0);

    Rng rng(13);
    std::normal_distribution<double> n01;
    std::vector<Vec6> pts(100);
    for (auto& p : pts)
        for (int d = 0; d < 6; ++d) p(d) = n01(rng);
    const auto ref = oracle::knn_all_pairs(pts, 10);
    const auto ser = kernels::knn_serial(pts, 10);
    const auto par = kernels::knn_parallel(pts, 10);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t k = 0; k < 10; ++k) {
            CHECK(ser.neighbors[i * 10 + k] == ref[i][k]);
            CHECK(par.neighbors[i * 10 + k] == ref[i][k]);
        }
        CHECK(ser.radius[i] == doctest::Approx((pts[i] - pts[ref[i][9]]).norm()));
        CHECK(ser.radius[i] == par.radius[i]);
    }
    CHECK_THROWS_AS(kernels::knn_serial(line, 1), InvalidInput);
}

TEST_CASE("multi-Bernoulli count PMF matches enumeration") {
    const std::vector<double> two{0.75, 0.75};
    const auto p = multi_bernoulli_count_pmf(two, 5);
    CHECK(p[0] == doctest::Approx(0.0625).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(0.375).epsilon(1e-12));
    CHECK(p[2] == doctest::Approx(0.5625).epsilon(1e-12));

    Rng rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> q(1 + t % 10);
        for (auto& x : q) x = u(rng);
        std::vector<double> ref(q.size() + 1, 0.0);
        for (std::uint32_t mask = 0; mask < (1u << q.size()); ++mask) {
            double pr = 1.0;
            int k = 0;
            for (std::size_t i = 0; i < q.size(); ++i) {
                const bool on = mask & (1u << i);
                pr *= on ? q[i] : 1.0 - q[i];
                k += on;
            }
            ref[k] += pr;
        }
        const auto got = multi_bernoulli_count_pmf(q, q.size());
        for (std::size_t k = 0; k < ref.size(); ++k) CHECK(std::abs(got[k] - ref[k]) < 1e-12);
    }
}

TEST_CASE("reward of an unchanged density is exactly zero") {
    const auto s = scene();
    Rng rng(2);
    const auto st = state_of(s, 1.0, cphd::CardinalityPmf::poisson(1.0));
    auto cloud = sample_particles(st.intensity, 500, rng);
    const auto knn = build_knn(cloud, 10);
    CHECK(renyi_reward(cloud.prior_weights, cloud.prior_weights, st.cardinality, st.cardinality, knn, 0.5) == 0.0);

    // Cardinality-only change: the bracket is one.
    const auto shifted = cphd::CardinalityPmf::poisson(2.0);
    double sum = 0.0;
    for (std::size_t n = 0; n < shifted.probs.size(); ++n)
        sum += std::pow(shifted.probs[n], 0.5) * std::pow(st.cardinality.probs[n], 0.5);
    CHECK(renyi_reward(cloud.prior_weights, cloud.prior_weights, st.cardinality, shifted, knn, 0.5) ==
          doctest::Approx(std::log(sum) / (0.5 - 1.0)).epsilon(1e-12));
}

TEST_CASE("estimator approaches the closed-form divergence of two Gaussians") {
    // prior N(0, 1), posterior N(1, 1); D_0.5 = 0.5 * 1 / 2 = 0.25.
    auto estimate = [](std::size_t n, std::uint64_t seed) {
        Rng rng(seed);
        std::normal_distribution<double> n01;
        ParticleCloud c;
        std::vector<double> post(n);
        for (std::size_t i = 0; i < n; ++i) {
            Vec6 x = Vec6::Zero();
            x(0) = n01(rng);
            c.states.push_back(x);
            post[i] = std::exp(x(0) - 0.5);
        }
        c.prior_weights.assign(n, 1.0 / static_cast<double>(n));
        const auto card = cphd::CardinalityPmf::point(1);
        return renyi_reward(c.prior_weights, post, card, card, build_knn(c, 10), 0.5);
    };
    const double d = estimate(10000, 1);
    CHECK(std::abs(d - 0.25) <= 0.15 * 0.25);
}

TEST_CASE("particle update: degenerate cases and scalar model") {
    const auto s = scene();
    Rng rng(7);
    const auto st = state_of(s, 2.0, cphd::CardinalityPmf::poisson(2.0, 30));
    auto cloud = sample_particles(st.intensity, 2000, rng);
    cloud.expected_count = 2.0;
    cphd::MeasurementSet empty{{}, astro::Epoch{0.0}, s.noise};

    cphd::DetectionModel away{0.75, gmm::FovRect(s.fov.center + Vec2(1.0, 0.0), 0.01, 0.01), s.observer};
    const auto none = particle_update_weights(cloud, empty, away, {}, st.cardinality);
    // Intensity weights: prior weight times the unchanged expected count.
    for (std::size_t i = 0; i < cloud.size(); ++i)
        CHECK(none.weights[i] == doctest::Approx(cloud.prior_weights[i] * 2.0).epsilon(1e-12));
    for (std::size_t n = 0; n < st.cardinality.probs.size(); ++n)
        CHECK(none.cardinality.probs[n] == doctest::Approx(st.cardinality.probs[n]).epsilon(1e-12));

    cphd::DetectionModel all{0.75, s.fov, s.observer};
    const auto missed = particle_update_weights(cloud, empty, all, {}, st.cardinality);
    std::vector<double> ref(st.cardinality.probs.size());
    double z = 0.0;
    for (std::size_t n = 0; n < ref.size(); ++n) z += ref[n] = st.cardinality.probs[n] * std::pow(0.25, double(n));
    for (std::size_t n = 0; n < ref.size(); ++n)
        CHECK(missed.cardinality.probs[n] == doctest::Approx(ref[n] / z).epsilon(1e-10));
    CHECK(missed.cardinality.mean() < st.cardinality.mean());
    for (std::size_t i = 1; i < cloud.size(); ++i) CHECK(missed.weights[i] == doctest::Approx(missed.weights[0]));
}

TEST_CASE("particle and Gaussian-mixture updates agree on the expected count") {
    const auto s = scene();
    const auto st = state_of(s, 1.5, cphd::CardinalityPmf::poisson(1.5, 30));
    const Vec2 z = s.fov.center + Vec2(2.0, -1.0) * 1e-4;
    cphd::MeasurementSet zs{{{z.x(), z.y()}}, astro::Epoch{0.0}, s.noise};
    cphd::DetectionModel det{0.75, s.fov, s.observer};
    const double gm = cphd::update(st, zs, det, {}).cardinality.mean();

    std::vector<double> est;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(100 + seed);
        auto cloud = sample_particles(st.intensity, 10000, rng);
        est.push_back(particle_update_weights(cloud, zs, det, {}, st.cardinality).cardinality.mean());
    }
    const double mean = std::accumulate(est.begin(), est.end(), 0.0) / est.size();
    double var = 0.0;
    for (double e : est) var += (e - mean) * (e - mean);
    const double se = std::sqrt(var / (est.size() - 1));
    CHECK(std::abs(mean - gm) <= 3.0 * std::max(se, 1e-9));
}

TEST_CASE("measurement-set sampling") {
    const auto s = scene();
    // Two particles, expected count 2, P_D 0.75: two Bernoulli(0.75) targets.
    std::vector<Vec6> two{s.target, s.target + Vec6(10.0, 0, 0, 0, 0, 0)};
    const auto ctx = context_for(cloud_at(two, 2.0), 2, s, 0.75, cphd::CardinalityPmf::poisson(2.0));
    const Action act{s.fov.center, s.fov};
    const auto view = view_action(act, ctx);
    REQUIRE(view.particles.size() == 2);
    Rng rng(19);
    std::vector<std::size_t> counts(3, 0);
    const int draws = 100000;
    for (int t = 0; t < draws; ++t) ++counts[sample_measurement_set(view, ctx, rng).size()];
    const double expect[3] = {0.0625, 0.375, 0.5625};
    for (int k = 0; k < 3; ++k) {
        const double sd = std::sqrt(expect[k] * (1.0 - expect[k]) / draws);
        CHECK(std::abs(counts[k] / double(draws) - expect[k]) < 3.0 * sd);
    }

    // Nothing in view.
    const Action off{s.fov.center + Vec2(1.0, 0.0), gmm::FovRect(s.fov.center + Vec2(1.0, 0.0), 0.01, 0.01)};
    for (int t = 0; t < 100; ++t) CHECK(sample_measurement_set(off, ctx, rng).empty());

    // One catalog object in view with P_D = 1 and no target mass.
    cphd::ClutterModel cat{{{s.target, s.cov}}, 1.0};
    auto far = cloud_at({s.target + Vec6(0, 0, 1e5, 0, 0, 0), s.target + Vec6(0, 0, 1.1e5, 0, 0, 0)}, 1.0);
    const auto cctx = context_for(far, 2, s, 1.0, cphd::CardinalityPmf::poisson(1.0), cat);
    for (int t = 0; t < 100; ++t) CHECK(sample_measurement_set(act, cctx, rng).size() == 1);
}

TEST_CASE("expected reward and selection") {
    const auto s = scene();
    const auto st = state_of(s, 1.0, cphd::CardinalityPmf::point(1));
    RewardConfig cfg{0.5, 10, 2000, 8, 3};
    Rng rng(23);
    const auto ctx = prepare_reward_context(st, {}, s.observer, s.noise, 1.0, cfg, rng);

    const Action covering{s.fov.center, s.fov};
    const Action empty{s.fov.center + Vec2(1.0, 0.0), gmm::FovRect(s.fov.center + Vec2(1.0, 0.0), 0.01, 0.01)};
    Rng r1(1);
    CHECK(expected_reward(empty, ctx, cfg, r1) == 0.0);
    CHECK(expected_reward(covering, ctx, cfg, r1) > 0.0);

    const std::vector<Action> one{covering};
    CHECK(select_action(one, ctx, cfg, 0).index == 0);
    const std::vector<Action> pair{empty, covering};
    const auto sel = select_action(pair, ctx, cfg, 0);
    CHECK(sel.index == 1);
    CHECK(sel.rewards[0] == 0.0);
    const auto ser = select_action_serial(pair, ctx, cfg, 0);
    CHECK(ser.rewards == sel.rewards);
    CHECK(select_action(pair, ctx, cfg, 0).rewards == sel.rewards);
}

TEST_CASE("fast reward path equals the full reference loop") {
    const auto s = scene();
    cphd::CphdState st{gmm::GaussianMixture(6), cphd::CardinalityPmf::poisson(3.0)};
    st.intensity.add({1.5, s.target, s.cov * 400.0});
    st.intensity.add({1.5, s.target + Vec6(800.0, -600.0, 0, 0, 0, 0), s.cov * 400.0});
    cphd::ClutterModel cat{{{s.target + Vec6(50.0, 0, 0, 0, 0, 0), s.cov}}, 0.75};
    RewardConfig cfg{0.5, 10, 1500, 8, 3};
    Rng rng(29);
    const auto ctx = prepare_reward_context(st, cat, s.observer, s.noise, 0.75, cfg, rng);
    const gmm::FovRect small(s.fov.center, 0.3 * kDeg, 0.3 * kDeg);
    const auto view = view_action({s.fov.center, small}, ctx);
    REQUIRE(view.particles.size() > 0);
    REQUIRE(view.particles.size() < ctx.cloud.size());
    for (int t = 0; t < 20; ++t) {
        const auto z = sample_measurement_set(view, ctx, rng);
        const double fast = measurement_set_reward(view, ctx, z, 0.5);
        const double ref = measurement_set_reward(view, ctx, z, 0.5, true);
        CHECK(std::isfinite(fast));
        CHECK(fast == doctest::Approx(ref).epsilon(1e-9));
    }
}

}
