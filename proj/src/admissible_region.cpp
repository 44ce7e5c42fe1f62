#include "seeker/admissible_region.hpp"

#include <algorithm>
#include <cmath>

namespace seeker::ar {

namespace {

double step(double lo, double hi, std::size_t n) {
    if (n > 1) return (hi - lo) / static_cast<double>(n - 1);
    return hi > lo ? hi - lo : 1.0;
}

void validate(const ArGridSpec& grid) {
    if (grid.n_rho == 0 || grid.n_rho_rate == 0) throw InvalidInput("ArGridSpec: counts must be positive");
    if (!(grid.rho_min > 0.0 && grid.rho_max >= grid.rho_min && grid.rho_rate_max >= grid.rho_rate_min))
        throw InvalidInput("ArGridSpec: bounds must be ordered with rho_min > 0");
}

ArPoint grid_point(const ArGridSpec& grid, std::size_t i, std::size_t j) {
    return ArPoint{grid.rho_min + static_cast<double>(i) * grid.rho_step(),
                   grid.rho_rate_min + static_cast<double>(j) * grid.rho_rate_step()};
}

}  // namespace

double ArGridSpec::rho_step() const { return step(rho_min, rho_max, n_rho); }
double ArGridSpec::rho_rate_step() const { return step(rho_rate_min, rho_rate_max, n_rho_rate); }

ArGridSpec ArGridSpec::defaults(const ArConstraints& c, const astro::StateVector& observer, std::size_t n_rho,
                                std::size_t n_rho_rate) {
    ArGridSpec g;
    g.rho_min = std::max(c.r_periapsis_min - observer.position.norm(), 500.0);
    g.rho_max = 2.0 * c.a_max;
    g.rho_rate_min = -10.0;
    g.rho_rate_max = 10.0;
    g.n_rho = n_rho;
    g.n_rho_rate = n_rho_rate;
    return g;
}

astro::StateVector polar_to_cartesian(const PolarState& polar, const astro::StateVector& observer) {
    const double ra = polar(0), dec = polar(1), ra_rate = polar(2), dec_rate = polar(3);
    const double rho = polar(4), rho_rate = polar(5);
    const double ca = std::cos(ra), sa = std::sin(ra), cd = std::cos(dec), sd = std::sin(dec);
    const Vec3 u(cd * ca, cd * sa, sd);
    const Vec3 du_dra(-cd * sa, cd * ca, 0.0);
    const Vec3 du_ddec(-sd * ca, -sd * sa, cd);
    const Vec3 udot = ra_rate * du_dra + dec_rate * du_ddec;
    return astro::StateVector{observer.position + rho * u,
                              observer.velocity + rho_rate * u + rho * udot};
}

astro::StateVector range_state(const AttributableVector& att, double rho, double rho_rate) {
    if (!(rho > 0.0)) throw InvalidInput("range_state: rho must be positive");
    PolarState p;
    p << att.ra, att.dec, att.ra_rate, att.dec_rate, rho, rho_rate;
    return polar_to_cartesian(p, att.observer);
}

bool admissible_state(const astro::StateVector& sv, const ArConstraints& c) {
    const auto shape = astro::orbit_shape(sv);
    if (!(shape.a > 0.0) || !std::isfinite(shape.a)) return false;
    return shape.a >= c.a_min && shape.a <= c.a_max && shape.e >= c.e_min && shape.e <= c.e_max &&
           shape.periapsis() >= c.r_periapsis_min;
}

bool admissible(const AttributableVector& att, double rho, double rho_rate, const ArConstraints& c) {
    return admissible_state(range_state(att, rho, rho_rate), c);
}

ArPointSet admissible_points(const AttributableVector& att, const ArConstraints& c, const ArGridSpec& grid) {
    validate(grid);
    const auto rows = static_cast<long>(grid.n_rho);
    std::vector<char> mask(grid.n_rho * grid.n_rho_rate, 0);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < grid.n_rho_rate; ++j) {
            const auto p = grid_point(grid, static_cast<std::size_t>(i), j);
            mask[static_cast<std::size_t>(i) * grid.n_rho_rate + j] = admissible(att, p.rho, p.rho_rate, c) ? 1 : 0;
        }
    }
    ArPointSet out{{}, grid.rho_step(), grid.rho_rate_step()};
    for (std::size_t i = 0; i < grid.n_rho; ++i)
        for (std::size_t j = 0; j < grid.n_rho_rate; ++j)
            if (mask[i * grid.n_rho_rate + j]) out.points.push_back(grid_point(grid, i, j));
    return out;
}

ArPointSet admissible_points_serial(const AttributableVector& att, const ArConstraints& c,
                                    const ArGridSpec& grid) {
    validate(grid);
    ArPointSet out{{}, grid.rho_step(), grid.rho_rate_step()};
    for (std::size_t i = 0; i < grid.n_rho; ++i) {
        for (std::size_t j = 0; j < grid.n_rho_rate; ++j) {
            const auto p = grid_point(grid, i, j);
            if (admissible(att, p.rho, p.rho_rate, c)) out.points.push_back(p);
        }
    }
    return out;
}

Mat6 polar_covariance(const AttributableVector& att, double rho_step, double rho_rate_step) {
    Mat6 cov = Mat6::Zero();
    cov.topLeftCorner<4, 4>() = att.noise;
    cov(4, 4) = 0.25 * rho_step * rho_step;
    cov(5, 5) = 0.25 * rho_rate_step * rho_rate_step;
    return cov;
}

gmm::GaussianMixture ar_gmm_from_points(const AttributableVector& att, const ArPointSet& points,
                                        double total_weight) {
    if (points.empty()) throw InvalidInput("build_ar_gmm: admissible region is empty");
    const Mat polar_cov = polar_covariance(att, points.rho_step, points.rho_rate_step);
    const double w = total_weight / static_cast<double>(points.points.size());
    const auto observer = att.observer;
    const gmm::VectorMap to_cartesian = [&observer](const Vec& p) -> Vec {
        return polar_to_cartesian(PolarState(p), observer).stacked();
    };

    gmm::GaussianMixture mix(6);
    mix.components.resize(points.points.size());
    const auto n = static_cast<long>(points.points.size());
#pragma omp parallel for schedule(static)
    for (long k = 0; k < n; ++k) {
        const auto& pt = points.points[static_cast<std::size_t>(k)];
        Vec mean(6);
        mean << att.ra, att.dec, att.ra_rate, att.dec_rate, pt.rho, pt.rho_rate;
        const auto ut = gmm::unscented_transform(mean, polar_cov, to_cartesian);
        mix.components[static_cast<std::size_t>(k)] = gmm::GaussianComponent{w, ut.mean, ut.cov};
    }
    return mix;
}

gmm::GaussianMixture build_ar_gmm(const AttributableVector& att, const ArConstraints& c, const ArGridSpec& grid,
                                  double total_weight) {
    return ar_gmm_from_points(att, admissible_points(att, c, grid), total_weight);
}

}  // namespace seeker::ar
