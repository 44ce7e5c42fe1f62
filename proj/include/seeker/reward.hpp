#pragma once

// Expected Renyi-divergence reward of a pointing action, evaluated on a
// particle snapshot of the predicted CPHD with a weighted k-nearest-neighbor
// density plug-in, and argmax action selection.

#include "seeker/cphd.hpp"
#include "seeker/gmm.hpp"
#include "seeker/kernels.hpp"
#include "seeker/random.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace seeker::reward {

struct ParticleCloud {
    std::vector<Vec6> states;
    std::vector<double> prior_weights;  // 1 / N each
    std::vector<Vec2> projected;        // (ra, dec) seen from the scan's observer
    double expected_count = 0.0;        // total intensity mass the cloud stands for

    std::size_t size() const { return states.size(); }
};

struct KnnIndex {
    std::size_t ell = 0;
    std::vector<std::uint32_t> neighbors;  // per particle: itself, then ell - 1 nearest others
    std::vector<double> radius;            // distance to the farthest neighbor (scaled space)
    Vec6 scale = Vec6::Ones();             // per-dimension standard deviations used for scaling
    bool degenerate = false;

    std::span<const std::uint32_t> of(std::size_t i) const { return {neighbors.data() + i * ell, ell}; }
};

struct Action {
    Vec2 pointing = Vec2::Zero();
    gmm::FovRect fov;
};

struct RewardConfig {
    double alpha = 0.5;
    std::size_t ell = 10;
    std::size_t n_samp = 5000;
    std::size_t n_trials = 8;
    std::uint64_t seed = 1;
};

/// Catalog objects in measurement space, computed once per scan.
struct ClutterMeasurementModel {
    gmm::GaussianMixture components;  // 2D, weight 1 each
    std::vector<Mat2> chol;           // lower Cholesky factors of each covariance
    double p_d = 1.0;
};

ClutterMeasurementModel clutter_measurement_model(const cphd::ClutterModel& clutter,
                                                  const astro::StateVector& observer, const Mat2& noise);

ParticleCloud sample_particles(const gmm::GaussianMixture& intensity, std::size_t n_samp, Rng& rng);
void project_particles(ParticleCloud& cloud, const astro::StateVector& observer);

KnnIndex build_knn(const ParticleCloud& cloud, std::size_t ell);
KnnIndex build_knn_serial(const ParticleCloud& cloud, std::size_t ell);

struct ParticlePosterior {
    std::vector<double> weights;  // posterior intensity weights, sum = posterior expected count
    cphd::CardinalityPmf cardinality;
};

ParticlePosterior particle_update_weights(const ParticleCloud& cloud, const cphd::MeasurementSet& z,
                                          const cphd::DetectionModel& det, const cphd::ClutterModel& clutter,
                                          const cphd::CardinalityPmf& prior);
ParticlePosterior particle_update_weights(const ParticleCloud& cloud, std::span<const std::size_t> in_fov,
                                          const cphd::MeasurementSet& z, double p_d,
                                          const ClutterMeasurementModel& clutter,
                                          std::span<const std::size_t> clutter_in_fov,
                                          const cphd::CardinalityPmf& prior);

/// Reward with the 1/N normalization that makes identical prior and
/// posterior score exactly zero. Full loop over all particles.
double renyi_reward(std::span<const double> prior_weights, std::span<const double> posterior_weights,
                    const cphd::CardinalityPmf& prior_card, const cphd::CardinalityPmf& posterior_card,
                    const KnnIndex& knn, double alpha);

/// PMF of the number of successes of independent Bernoulli(q_j), truncated at max_count.
std::vector<double> multi_bernoulli_count_pmf(std::span<const double> q, std::size_t max_count);

std::vector<std::size_t> particles_in_fov(const ParticleCloud& cloud, const gmm::FovRect& fov);

/// Everything an action evaluation needs that does not depend on the action.
struct RewardContext {
    ParticleCloud cloud;
    KnnIndex knn;
    ClutterMeasurementModel clutter;
    cphd::CardinalityPmf prior_cardinality;
    Mat2 noise = Mat2::Identity();
    Mat2 noise_chol = Mat2::Identity();
    Mat2 noise_inv = Mat2::Identity();
    double noise_log_norm = 0.0;  // log of the N(0, R) peak density
    double p_d = 1.0;
    /// For each particle, the particles whose neighbor sets contain it.
    std::vector<std::vector<std::uint32_t>> reverse_neighbors;
};

RewardContext prepare_reward_context(const cphd::CphdState& predicted, const cphd::ClutterModel& clutter,
                                     const astro::StateVector& observer, const Mat2& noise, double p_d,
                                     const RewardConfig& cfg, Rng& rng);

/// Per-action quantities shared by every Monte-Carlo trial.
struct ActionView {
    std::vector<std::size_t> particles;  // in-FOV particle indices
    std::vector<std::size_t> catalog;    // in-FOV catalog indices
    std::vector<std::size_t> affected;   // particles whose neighbor set meets the FOV
    std::vector<double> target_count_pmf;
};

ActionView view_action(const Action& action, const RewardContext& ctx);

cphd::MeasurementSet sample_measurement_set(const ActionView& view, const RewardContext& ctx, Rng& rng);
cphd::MeasurementSet sample_measurement_set(const Action& action, const RewardContext& ctx, Rng& rng);

/// Reward of one measurement set. The default skips particles whose
/// neighbor sets miss the FOV; `reference` runs the full renyi_reward loop.
double measurement_set_reward(const ActionView& view, const RewardContext& ctx, const cphd::MeasurementSet& z,
                              double alpha, bool reference = false);

/// Mean over n_trials sampled measurement sets; trial t runs on the t-th seed drawn from `rng`.
double expected_reward(const Action& action, const RewardContext& ctx, const RewardConfig& cfg, Rng& rng);

struct Selection {
    std::size_t index = 0;
    std::vector<double> rewards;
};

/// Parallel sweep. Every action draws from the stream (seed, scan), so
/// trial t of each action shares its random numbers (common random numbers).
Selection select_action(std::span<const Action> actions, const RewardContext& ctx, const RewardConfig& cfg,
                        std::uint64_t scan_index);
Selection select_action_serial(std::span<const Action> actions, const RewardContext& ctx, const RewardConfig& cfg,
                               std::uint64_t scan_index);

}  // namespace seeker::reward
