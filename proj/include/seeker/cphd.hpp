#pragma once

// Gaussian-mixture CPHD recursion with a state-dependent detection
// probability and a catalog-driven clutter model.

#include "seeker/astro.hpp"
#include "seeker/gmm.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace seeker::cphd {

inline constexpr std::size_t kDefaultMaxCardinality = 40;

struct CardinalityPmf {
    std::vector<double> probs;  // n = 0 .. N_max

    std::size_t max_count() const { return probs.empty() ? 0 : probs.size() - 1; }
    double mean() const;
    /// Mode, smallest n on ties.
    std::size_t map() const;
    double sum() const;
    void normalize();

    static CardinalityPmf point(std::size_t n, std::size_t n_max = kDefaultMaxCardinality);
    /// Poisson(mean) truncated at n_max and renormalized.
    static CardinalityPmf poisson(double mean, std::size_t n_max = kDefaultMaxCardinality);
    /// Uniform over 0..upper.
    static CardinalityPmf uniform(std::size_t upper, std::size_t n_max = kDefaultMaxCardinality);
};

struct CphdState {
    gmm::GaussianMixture intensity;  // 6D Cartesian
    CardinalityPmf cardinality;
};

struct DetectionModel {
    double p_d = 1.0;
    gmm::FovRect fov;
    astro::StateVector observer;
};

struct CatalogObject {
    Vec6 mean;
    Mat6 cov;
};

struct ClutterModel {
    std::vector<CatalogObject> catalog;
    double p_d = 1.0;
};

struct MeasurementSet {
    std::vector<astro::AngleMeasurement> z;
    astro::Epoch epoch;
    Mat2 noise = Mat2::Identity();

    std::size_t size() const { return z.size(); }
    bool empty() const { return z.empty(); }
};

/// Elementary symmetric functions e_0..e_m by incremental polynomial expansion.
std::vector<double> esf(std::span<const double> values);
/// log e_j from log-values, for inputs spanning many orders of magnitude.
std::vector<double> log_esf(std::span<const double> log_values);

/// Cardinality-dependent factors of the CPHD update. Intensities enter
/// normalized by the prior mass W: `log_xi[z] = log(<D, psi_z> / W)` and
/// `missed_fraction = <1 - p_D, D> / W`.
struct CphdCorrection {
    std::vector<double> posterior;      // updated cardinality PMF
    double log_missed = 0.0;            // log(<U1[Z], rho> / <U0[Z], rho>) with W folded out
    std::vector<double> log_detected;   // log(<U1[Z \ z], rho> / <U0[Z], rho>) with W folded out
};

CphdCorrection cphd_correction(std::span<const double> prior, std::span<const double> clutter_pmf,
                               std::span<const double> log_xi, double missed_fraction);

/// Ra-wrapped log N(z; mean, cov) in measurement space.
double log_angle_likelihood(const Vec2& z, const Vec2& mean, const Mat2& cov);

CphdState predict(const CphdState& state, double dt);

/// One 2D component per catalog object: mean h(mu), covariance H P H^T + R.
gmm::GaussianMixture clutter_intensity(const ClutterModel& clutter, const astro::StateVector& observer,
                                       const Mat2& noise);

CardinalityPmf clutter_cardinality(std::size_t n_kappa_fov, double p_d);

/// Catalog indices whose predicted measurement lies inside the FOV.
std::vector<std::size_t> catalog_in_fov(const gmm::GaussianMixture& clutter_2d, const gmm::FovRect& fov);

CphdState update(const CphdState& state, const MeasurementSet& z, const DetectionModel& det,
                 const ClutterModel& clutter);

double expected_cardinality(const CphdState& state);
std::size_t map_cardinality(const CphdState& state);

/// Propagates every catalog object through the two-body flow with the unscented transform.
ClutterModel propagate_catalog(const ClutterModel& clutter, double dt);

}  // namespace seeker::cphd
