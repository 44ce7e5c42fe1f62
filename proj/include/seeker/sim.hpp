#pragma once

// Scenario construction, truth generation, the closed sensing loop, the
// scanning baseline, evaluation metrics and Monte-Carlo aggregation.

#include "seeker/admissible_region.hpp"
#include "seeker/cphd.hpp"
#include "seeker/reward.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace seeker::sim {

struct CardinalityPrior {
    enum class Kind { poisson, uniform };
    Kind kind = Kind::poisson;
    double mean = 3.0;        // poisson
    std::size_t upper = 19;   // uniform over 0..upper
    std::size_t n_max = cphd::kDefaultMaxCardinality;

    cphd::CardinalityPmf pmf() const;
};

struct FilterConfig {
    gmm::SplitOptions split;
    gmm::PruneOptions prune;
};

struct Scenario {
    std::string name;
    astro::KeplerianElements truth_elements;  // at t = 0
    astro::ObserverSite initial_site;
    astro::ObserverSite followup_site;
    double earth_angle0_deg = 0.0;  // Earth rotation angle at t = 0
    double detection_epoch_s = 0.0;
    double cutout_hours = 0.0;
    double track_arc_s = 120.0;  // spacing of the two angle measurements forming the attributable
    double fov_deg = 6.0;
    double noise_arcsec = 3.0;
    double p_d = 0.75;
    std::size_t n_scans = 30;
    double scan_dt_s = 15.0;
    ar::ArConstraints ar;
    std::size_t ar_n_rho = 200;
    std::size_t ar_n_rho_rate = 100;
    std::size_t n_targets = 1;
    std::size_t n_clutter = 0;
    CardinalityPrior cardinality_prior;
    FilterConfig filter;
    double catalog_sigma_pos_km = 1.0;
    double catalog_sigma_vel_kms = 1e-3;
    /// Fraction of projected intensity mass the action grid must enclose (per tail, trimmed from each side).
    double grid_tail_mass = 0.0;
    std::uint64_t seed = 1;

    astro::Epoch detection_epoch() const { return astro::Epoch{detection_epoch_s}; }
    astro::Epoch followup_start() const { return astro::Epoch{detection_epoch_s + cutout_hours * 3600.0}; }
    astro::Epoch scan_epoch(std::size_t k) const { return followup_start() + static_cast<double>(k) * scan_dt_s; }
    double sigma_rad() const { return noise_arcsec * kArcsec; }
    Mat2 noise() const;
    astro::StateVector initial_observer(astro::Epoch t) const {
        return astro::site_state(initial_site, t, earth_angle0_deg * kDeg);
    }
    astro::StateVector followup_observer(astro::Epoch t) const {
        return astro::site_state(followup_site, t, earth_angle0_deg * kDeg);
    }
    double fov_rad() const { return fov_deg * kDeg; }
    void validate() const;
};

struct TruthModel {
    std::vector<Vec6> targets;  // at the current epoch
    std::vector<Vec6> clutter;
    astro::Epoch epoch;
};

/// Action grid over the field of regard. Rows run over declination,
/// columns over right ascension, both at half-FOV spacing; action index is
/// row * n_cols + col.
struct ForGrid {
    double ra_min = 0.0;  // center of the first column (may lie outside [0, 2pi))
    double dec_min = 0.0;
    double step = 0.0;
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<reward::Action> actions;

    std::size_t size() const { return actions.size(); }
    double ra_max() const { return ra_min + step * static_cast<double>(n_cols - 1); }
    double dec_max() const { return dec_min + step * static_cast<double>(n_rows - 1); }
    std::size_t row(std::size_t k) const { return k / n_cols; }
    std::size_t col(std::size_t k) const { return k % n_cols; }
};

/// Grid spanning the bounding box of the projected intensity.
ForGrid make_for_grid(const gmm::GaussianMixture& intensity, const astro::StateVector& observer, double fov_rad,
                      double tail_mass = 0.0);

/// Per-cell projected intensity mass (components binned by projected mean into step-sized cells).
std::vector<double> cell_intensity(const gmm::GaussianMixture& intensity, const astro::StateVector& observer,
                                   const ForGrid& grid);

/// Search set shared by every Monte-Carlo trial of a scenario.
struct SearchSet {
    ar::AttributableVector attributable;
    gmm::GaussianMixture ar_mixture;  // at the detection epoch
    cphd::CphdState state;            // at followup_start
    ForGrid grid;
    std::vector<double> cell_mass;    // scan-0 projected intensity per action cell
};

struct InitialConditions {
    SearchSet search;
    cphd::ClutterModel catalog;  // at followup_start
    TruthModel truth;            // at followup_start
    std::vector<Vec6> targets_at_detection;
    std::vector<Vec6> clutter_at_detection;
};

/// Attributable vector from two noisy angle measurements track_arc_s apart.
ar::AttributableVector make_attributable(const Scenario& s, Rng& rng);

/// AR mixture at the detection epoch for an attributable.
gmm::GaussianMixture search_set(const Scenario& s, const ar::AttributableVector& att);

/// Draws n states from the mixture, redrawing any that violate the AR constraints.
std::vector<Vec6> sample_admissible(const gmm::GaussianMixture& mix, const ar::ArConstraints& c, std::size_t n,
                                    Rng& rng);

SearchSet build_search_set(const Scenario& s);
/// Truth targets and catalog for one trial; identical for every policy.
InitialConditions draw_truth(const Scenario& s, const SearchSet& search, std::uint64_t trial);
InitialConditions init_scenario(const Scenario& s, std::uint64_t trial);

cphd::MeasurementSet truth_measurements(const TruthModel& truth, const reward::Action& action, double p_d,
                                        const Mat2& noise, astro::Epoch epoch, const astro::StateVector& observer,
                                        Rng& rng, std::size_t* target_hits = nullptr);

/// Deterministic visiting order: cells by descending scan-0 intensity, ties by index.
struct ScanningSchedule {
    std::vector<std::size_t> order;
    std::size_t action(std::size_t scan) const { return order[scan % order.size()]; }
};

ScanningSchedule scanning_policy(const std::vector<double>& cell_mass);

/// Renyi (alpha = 0.5) divergence of the filter from the true multi-target state.
double divergence_metric(const cphd::CphdState& state, const std::vector<Vec6>& truth);
double cardinality_error(const cphd::CardinalityPmf& pmf, std::size_t n_star);

/// Components heavier than 0.5 whose projection misses the 99% gate of every truth target.
std::size_t false_tracks(const cphd::CphdState& state, const std::vector<Vec6>& truth,
                         const astro::StateVector& observer, const Mat2& noise);

enum class Policy { information, scanning };

const char* policy_name(Policy p);

struct ScanRecord {
    std::size_t scan = 0;
    double epoch_s = 0.0;
    std::size_t action = 0;
    Vec2 pointing = Vec2::Zero();
    std::size_t n_measurements = 0;
    std::size_t n_target_hits = 0;
    double divergence = 0.0;
    double expected_cardinality = 0.0;
    std::size_t map_cardinality = 0;
    double cardinality_error = 0.0;
    std::size_t n_components = 0;
    std::size_t n_false_tracks = 0;
    double wall_s = 0.0;
};

struct RunResult {
    Policy policy = Policy::information;
    std::vector<ScanRecord> scans;
    cphd::CphdState final_state;
};

/// Data handed to an optional per-scan observer (the CLI writes it out).
struct ScanSnapshot {
    const ScanRecord& record;
    const std::vector<double>* rewards;  // null for the scanning policy
    const cphd::CphdState& posterior;
    const ForGrid& grid;
    const astro::StateVector& observer;
};

using ScanCallback = std::function<void(const ScanSnapshot&)>;

RunResult run_closed_loop(const Scenario& s, const InitialConditions& init, Policy policy,
                          const reward::RewardConfig& rcfg, std::uint64_t trial,
                          const ScanCallback& on_scan = {});

struct Quantiles {
    double q25 = 0.0;
    double median = 0.0;
    double q75 = 0.0;
};

Quantiles quantiles(std::vector<double> values);

struct PolicyAggregate {
    Policy policy = Policy::information;
    std::vector<Quantiles> divergence;        // per scan
    std::vector<Quantiles> cardinality_error;  // per scan
};

struct McAggregate {
    std::size_t n_trials = 0;
    std::vector<PolicyAggregate> policies;
    std::vector<std::vector<RunResult>> runs;  // [policy][trial]
};

McAggregate monte_carlo(const Scenario& s, const std::vector<Policy>& policies, std::size_t n_trials,
                        const reward::RewardConfig& rcfg);
McAggregate aggregate(const std::vector<Policy>& policies, std::vector<std::vector<RunResult>> runs);

}  // namespace seeker::sim
