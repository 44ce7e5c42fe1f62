#pragma once

// Optical admissible region: range/range-rate hypotheses consistent with a
// single angles-and-rates track, and its Gaussian-mixture approximation.

#include "seeker/astro.hpp"
#include "seeker/gmm.hpp"

#include <cstddef>
#include <vector>

namespace seeker::ar {

struct AttributableVector {
    double ra = 0.0;
    double dec = 0.0;
    double ra_rate = 0.0;   // rad/s
    double dec_rate = 0.0;  // rad/s
    astro::Epoch epoch;
    astro::StateVector observer;
    Eigen::Matrix4d noise = Eigen::Matrix4d::Identity();
};

struct ArConstraints {
    double e_min = 0.0;
    double e_max = 0.0;
    double a_min = 0.0;  // km
    double a_max = 0.0;
    double r_periapsis_min = 0.0;
};

struct ArGridSpec {
    double rho_min = 0.0;  // km
    double rho_max = 0.0;
    double rho_rate_min = 0.0;  // km/s
    double rho_rate_max = 0.0;
    std::size_t n_rho = 0;
    std::size_t n_rho_rate = 0;

    double rho_step() const;
    double rho_rate_step() const;
    /// Default bounds: rho in [max(r_p,min - |q|, 500), 2 a_max], rho_rate in [-10, 10].
    static ArGridSpec defaults(const ArConstraints& c, const astro::StateVector& observer,
                               std::size_t n_rho = 200, std::size_t n_rho_rate = 100);
};

struct ArPoint {
    double rho = 0.0;
    double rho_rate = 0.0;
};

struct ArPointSet {
    std::vector<ArPoint> points;  // row-major over (rho, rho_rate)
    double rho_step = 0.0;
    double rho_rate_step = 0.0;
    bool empty() const { return points.empty(); }
};

/// Polar state ordering used for the unscented transform.
/// (ra, dec, ra_rate, dec_rate, rho, rho_rate)
using PolarState = Vec6;

astro::StateVector range_state(const AttributableVector& att, double rho, double rho_rate);
astro::StateVector polar_to_cartesian(const PolarState& polar, const astro::StateVector& observer);

bool admissible(const AttributableVector& att, double rho, double rho_rate, const ArConstraints& c);
bool admissible_state(const astro::StateVector& sv, const ArConstraints& c);

/// Evaluates every grid point (OpenMP over rows).
ArPointSet admissible_points(const AttributableVector& att, const ArConstraints& c, const ArGridSpec& grid);
/// Single-threaded reference for admissible_points.
ArPointSet admissible_points_serial(const AttributableVector& att, const ArConstraints& c,
                                    const ArGridSpec& grid);

/// Shared polar covariance: attributable noise plus half-spacing range sigmas.
Mat6 polar_covariance(const AttributableVector& att, double rho_step, double rho_rate_step);

gmm::GaussianMixture build_ar_gmm(const AttributableVector& att, const ArConstraints& c, const ArGridSpec& grid,
                                  double total_weight);
gmm::GaussianMixture ar_gmm_from_points(const AttributableVector& att, const ArPointSet& points,
                                        double total_weight);

}  // namespace seeker::ar
