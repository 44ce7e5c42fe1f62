#pragma once

// Gaussian mixtures: sigma-point transforms, projection onto the field of
// regard, FOV-aware recursive splitting and mixture maintenance.

#include "seeker/astro.hpp"
#include "seeker/types.hpp"

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

namespace seeker::gmm {

struct GaussianComponent {
    double weight = 0.0;
    Vec mean;
    Mat cov;
};

struct GaussianMixture {
    std::vector<GaussianComponent> components;
    int dim = 0;

    GaussianMixture() = default;
    explicit GaussianMixture(int d) : dim(d) {}

    std::size_t size() const { return components.size(); }
    bool empty() const { return components.empty(); }
    void add(GaussianComponent c);
    double total_weight() const;
    /// Weight-normalized first moment.
    Vec mean() const;
    /// Weight-normalized second central moment.
    Mat covariance() const;
};

/// Rectangular footprint in (ra, dec). Vertices run counterclockwise
/// starting from the (-,-) corner.
struct FovRect {
    Vec2 center = Vec2::Zero();
    double half_width = 0.0;
    double half_height = 0.0;

    FovRect() = default;
    FovRect(Vec2 c, double hw, double hh);

    std::array<Vec2, 4> vertices() const;
    /// Shifts the ra of `p` by whole turns so it lies within pi of the center.
    Vec2 unwrap(const Vec2& p) const;
    bool contains(const Vec2& p) const;
};

struct SplitLibrary {
    std::vector<double> alphas;
    std::vector<double> means;
    std::vector<double> sigmas;

    std::size_t size() const { return alphas.size(); }
    /// Three-component univariate library (beta = 2, lambda = 0.001).
    static SplitLibrary three_component();
    /// Sum of alpha_i (m_i^2 + sigma_i^2): variance of the library mixture.
    double variance() const;
};

struct UtParams {
    double alpha = 1.0;
    double beta = 2.0;
    double kappa = 0.0;
};

struct UtResult {
    Vec mean;
    Mat cov;
};

using VectorMap = std::function<Vec(const Vec&)>;

/// Symmetrizes and clamps eigenvalues below 1e-12 trace/n.
Mat repair_spd(const Mat& cov);

UtResult unscented_transform(const Vec& mean, const Mat& cov, const VectorMap& map,
                             const UtParams& params = {});
UtResult unscented_transform(const GaussianComponent& comp, const VectorMap& map,
                             const UtParams& params = {});

/// Projected mean, covariance and measurement Jacobian of a component.
struct Projection {
    Vec2 mean;
    Mat2 cov;
    Mat jacobian;  // 2 x n
};

/// Maps a component to its FOR projection; the default one linearizes
/// measure_radec around the mean.
using Projector = std::function<Projection(const GaussianComponent&)>;

Projection project_to_for(const GaussianComponent& comp, const astro::StateVector& observer);
Projector radec_projector(const astro::StateVector& observer);

struct FovDistance {
    double distance = 0.0;
    bool inside = false;
};

FovDistance mahalanobis_to_fov(const Vec2& mean, const Mat2& cov, const FovRect& fov);

struct SplitDirection {
    Vec direction;
    double eigenvalue = 0.0;
    int index = 0;
};

SplitDirection select_split_direction(const GaussianComponent& comp, const Mat& jacobian);

GaussianMixture split_component(const GaussianComponent& comp, const SplitDirection& dir,
                                const SplitLibrary& lib);

struct SplitOptions {
    double d_mahalanobis = 3.0;
    int max_depth = 6;
    std::size_t max_components = 10000;
};

GaussianMixture recursive_fov_split(const GaussianMixture& mix, const FovRect& fov,
                                    const Projector& project, const SplitOptions& opts = {},
                                    const SplitLibrary& lib = SplitLibrary::three_component());

GaussianMixture recursive_fov_split(const GaussianMixture& mix, const FovRect& fov,
                                    const astro::StateVector& observer,
                                    const SplitOptions& opts = {});

/// Closed-form integral of (p - q)^2.
double gmm_l2_distance(const GaussianMixture& p, const GaussianMixture& q);

struct PruneOptions {
    double weight_floor = 1e-6;
    double merge_distance = 0.1;
    std::size_t max_components = 10000;
};

GaussianMixture prune_and_merge(const GaussianMixture& mix, const PruneOptions& opts = {});

/// log N(x; mean, cov)
double log_gaussian(const Vec& x, const Vec& mean, const Mat& cov);
double log_gaussian(const Vec2& x, const Vec2& mean, const Mat2& cov);

/// log of sum_i exp(v_i); -inf for an empty or all -inf input.
double log_sum_exp(const std::vector<double>& v);

}  // namespace seeker::gmm
