#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library code path it is used to check.

#include "seeker/astro.hpp"
#include "seeker/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace oracle {

using seeker::Mat;
using seeker::Vec;
using seeker::Vec2;
using seeker::Vec3;
using seeker::Vec6;

/// e_j by enumerating every subset.
inline std::vector<double> esf_by_subsets(const std::vector<double>& v) {
    const std::size_t m = v.size();
    std::vector<double> e(m + 1, 0.0);
    for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
        double prod = 1.0;
        std::size_t bits = 0;
        for (std::size_t i = 0; i < m; ++i) {
            if (mask & (1u << i)) {
                prod *= v[i];
                ++bits;
            }
        }
        e[bits] += prod;
    }
    return e;
}

inline Vec6 two_body_rhs(const Vec6& x, double mu) {
    const Vec3 r = x.head<3>();
    const double rn = r.norm();
    Vec6 d;
    d << x.segment<3>(3), -mu / (rn * rn * rn) * r;
    return d;
}

/// Classical fourth-order Runge-Kutta on the two-body ODE.
inline Vec6 rk4_two_body(Vec6 x, double dt, int steps, double mu = seeker::astro::kMu) {
    const double h = dt / steps;
    for (int i = 0; i < steps; ++i) {
        const Vec6 k1 = two_body_rhs(x, mu);
        const Vec6 k2 = two_body_rhs(x + 0.5 * h * k1, mu);
        const Vec6 k3 = two_body_rhs(x + 0.5 * h * k2, mu);
        const Vec6 k4 = two_body_rhs(x + h * k3, mu);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return x;
}

/// ra/dec straight from the line-of-sight vector.
inline Vec2 radec(const Vec3& target, const Vec3& observer) {
    const Vec3 d = target - observer;
    double ra = std::atan2(d.y(), d.x());
    if (ra < 0.0) ra += seeker::kTwoPi;
    return {ra, std::asin(d.z() / d.norm())};
}

/// Central differences of radec with respect to the target position.
inline Eigen::Matrix<double, 2, 3> radec_jacobian_fd(const Vec3& target, const Vec3& observer, double rel_step) {
    Eigen::Matrix<double, 2, 3> j;
    const double h = rel_step * (target - observer).norm();
    for (int c = 0; c < 3; ++c) {
        Vec3 tp = target, tm = target;
        tp(c) += h;
        tm(c) -= h;
        Vec2 d = radec(tp, observer) - radec(tm, observer);
        d.x() = std::remainder(d.x(), seeker::kTwoPi);
        j.col(c) = d / (2.0 * h);
    }
    return j;
}

inline double normal_pdf(double x, double mean, double var) {
    return std::exp(-0.5 * (x - mean) * (x - mean) / var) / std::sqrt(seeker::kTwoPi * var);
}

struct Gauss1 {
    double w, mean, var;
};

inline double mixture_pdf(const std::vector<Gauss1>& g, double x) {
    double s = 0.0;
    for (const auto& c : g) s += c.w * normal_pdf(x, c.mean, c.var);
    return s;
}

/// Integral of (p - q)^2 by the trapezoid rule on a fine grid.
inline double l2_by_quadrature(const std::vector<Gauss1>& p, const std::vector<Gauss1>& q, double lo = -20.0,
                               double hi = 20.0, int n = 400000) {
    const double h = (hi - lo) / n;
    double s = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double x = lo + h * i;
        const double d = mixture_pdf(p, x) - mixture_pdf(q, x);
        s += (i == 0 || i == n ? 0.5 : 1.0) * d * d;
    }
    return s * h;
}

/// ell nearest (self first, then others by distance, ties by index) from all pairwise distances.
inline std::vector<std::vector<std::uint32_t>> knn_all_pairs(const std::vector<Vec6>& pts, std::size_t ell) {
    std::vector<std::vector<std::uint32_t>> out(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        std::vector<std::pair<double, std::uint32_t>> d;
        for (std::size_t j = 0; j < pts.size(); ++j)
            if (j != i) d.emplace_back((pts[i] - pts[j]).squaredNorm(), static_cast<std::uint32_t>(j));
        std::sort(d.begin(), d.end());
        out[i].push_back(static_cast<std::uint32_t>(i));
        for (std::size_t k = 0; k + 1 < ell; ++k) out[i].push_back(d[k].second);
    }
    return out;
}

/// Upper regularized incomplete gamma Q(a, x).
inline double gamma_q(double a, double x) {
    if (x <= 0.0) return 1.0;
    const double lg = std::lgamma(a);
    if (x < a + 1.0) {
        double sum = 1.0 / a, term = sum, ap = a;
        for (int n = 0; n < 1000; ++n) {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if (std::abs(term) < std::abs(sum) * 1e-15) break;
        }
        return 1.0 - sum * std::exp(-x + a * std::log(x) - lg);
    }
    // Lentz continued fraction.
    double b = x + 1.0 - a, c = 1.0 / 1e-300, d = 1.0 / b, h = d;
    for (int i = 1; i < 1000; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - lg) * h;
}

inline double chi2_sf(double stat, double dof) { return gamma_q(0.5 * dof, 0.5 * stat); }

/// Pearson statistic and p-value of observed counts against a PMF; bins with
/// expected count below 5 are pooled into the tail.
struct Chi2Result {
    double stat = 0.0;
    double dof = 0.0;
    double p_value = 0.0;
};

inline Chi2Result chi2_test(const std::vector<std::size_t>& counts, const std::vector<double>& pmf) {
    const double n = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
    std::vector<double> obs, expd;
    double pool_o = 0.0, pool_e = 0.0;
    for (std::size_t k = 0; k < std::max(counts.size(), pmf.size()); ++k) {
        const double o = k < counts.size() ? static_cast<double>(counts[k]) : 0.0;
        const double e = k < pmf.size() ? n * pmf[k] : 0.0;
        if (e >= 5.0) {
            obs.push_back(o);
            expd.push_back(e);
        } else {
            pool_o += o;
            pool_e += e;
        }
    }
    if (pool_e > 0.0) {
        obs.push_back(pool_o);
        expd.push_back(pool_e);
    }
    Chi2Result r;
    for (std::size_t i = 0; i < obs.size(); ++i) r.stat += (obs[i] - expd[i]) * (obs[i] - expd[i]) / expd[i];
    r.dof = static_cast<double>(obs.size()) - 1.0;
    r.p_value = r.dof > 0.0 ? chi2_sf(r.stat, r.dof) : 1.0;
    return r;
}

/// d(ra, dec)/d(position) written out from the atan2/asin chain rule.
inline Eigen::Matrix<double, 2, 3> radec_jacobian_analytic(const Vec3& target, const Vec3& observer) {
    const Vec3 d = target - observer;
    const double rxy2 = d.x() * d.x() + d.y() * d.y();
    const double rxy = std::sqrt(rxy2);
    const double r2 = d.squaredNorm();
    Eigen::Matrix<double, 2, 3> j;
    j << -d.y() / rxy2, d.x() / rxy2, 0.0,
        -d.x() * d.z() / (r2 * rxy), -d.y() * d.z() / (r2 * rxy), rxy / r2;
    return j;
}

/// Textbook (non-Joseph) EKF update of a 6D state observed through radec.
struct KalmanResult {
    Vec mean;
    Mat cov;
};

inline KalmanResult ekf_radec_update(const Vec& mean, const Mat& cov, const Vec2& z, const Eigen::Matrix2d& r,
                                     const Vec3& observer) {
    Mat jac = Mat::Zero(2, 6);
    jac.leftCols(3) = radec_jacobian_analytic(mean.head<3>(), observer);
    const Mat s = jac * cov * jac.transpose() + Mat(r);
    const Mat k = cov * jac.transpose() * s.inverse();
    Vec2 resid = z - radec(mean.head<3>(), observer);
    resid.x() = std::remainder(resid.x(), seeker::kTwoPi);
    return {mean + k * resid, cov - k * jac * cov};
}

}  // namespace oracle
