#include "seeker/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace seeker::gmm {

void GaussianMixture::add(GaussianComponent c) {
    if (dim == 0) dim = static_cast<int>(c.mean.size());
    if (c.mean.size() != dim || c.cov.rows() != dim || c.cov.cols() != dim)
        throw InvalidInput("GaussianMixture::add: dimension mismatch");
    components.push_back(std::move(c));
}

double GaussianMixture::total_weight() const {
    double w = 0.0;
    for (const auto& c : components) w += c.weight;
    return w;
}

Vec GaussianMixture::mean() const {
    Vec m = Vec::Zero(dim);
    const double w = total_weight();
    if (w <= 0.0) return m;
    for (const auto& c : components) m += c.weight * c.mean;
    return m / w;
}

Mat GaussianMixture::covariance() const {
    const Vec m = mean();
    Mat p = Mat::Zero(dim, dim);
    const double w = total_weight();
    if (w <= 0.0) return p;
    for (const auto& c : components) {
        const Vec d = c.mean - m;
        p += c.weight * (c.cov + d * d.transpose());
    }
    return p / w;
}

FovRect::FovRect(Vec2 c, double hw, double hh) : center(std::move(c)), half_width(hw), half_height(hh) {
    if (!(hw > 0.0 && hh > 0.0)) throw InvalidInput("FovRect: extents must be positive");
}

std::array<Vec2, 4> FovRect::vertices() const {
    return {center + Vec2(-half_width, -half_height), center + Vec2(half_width, -half_height),
            center + Vec2(half_width, half_height), center + Vec2(-half_width, half_height)};
}

Vec2 FovRect::unwrap(const Vec2& p) const {
    return {center.x() + astro::wrap_pi(p.x() - center.x()), p.y()};
}

bool FovRect::contains(const Vec2& p) const {
    const Vec2 d = unwrap(p) - center;
    return std::abs(d.x()) <= half_width && std::abs(d.y()) <= half_height;
}

SplitLibrary SplitLibrary::three_component() {
    return SplitLibrary{{0.2252246249, 0.5495507502, 0.2252246249},
                        {-1.0575154615, 0.0, 1.0575154615},
                        {0.6715662887, 0.6715662887, 0.6715662887}};
}

double SplitLibrary::variance() const {
    double v = 0.0;
    for (std::size_t i = 0; i < size(); ++i) v += alphas[i] * (means[i] * means[i] + sigmas[i] * sigmas[i]);
    return v;
}

Mat repair_spd(const Mat& cov) {
    const Mat sym = 0.5 * (cov + cov.transpose());
    const auto n = sym.rows();
    if (n == 0) return sym;
    Eigen::SelfAdjointEigenSolver<Mat> eig(sym);
    if (eig.info() != Eigen::Success) throw NumericalError("repair_spd: eigendecomposition failed");
    const double floor = std::max(1e-12 * sym.trace() / static_cast<double>(n), 0.0);
    Vec vals = eig.eigenvalues();
    bool clamped = false;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (vals(i) < floor) {
            vals(i) = floor;
            clamped = true;
        }
    }
    if (!clamped) return sym;
    return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

UtResult unscented_transform(const Vec& mean, const Mat& cov, const VectorMap& map, const UtParams& params) {
    const auto n = static_cast<double>(mean.size());
    const double lambda = params.alpha * params.alpha * (n + params.kappa) - n;
    const double scale = std::sqrt(n + lambda);

    Eigen::LLT<Mat> llt(0.5 * (cov + cov.transpose()));
    if (llt.info() != Eigen::Success) {
        llt.compute(repair_spd(cov));
        if (llt.info() != Eigen::Success) throw NumericalError("unscented_transform: covariance not SPD");
    }
    const Mat sqrt_cov = scale * llt.matrixL().toDenseMatrix();

    const double wm0 = lambda / (n + lambda);
    const double wc0 = wm0 + (1.0 - params.alpha * params.alpha + params.beta);
    const double wi = 1.0 / (2.0 * (n + lambda));

    const auto npts = 2 * mean.size() + 1;
    std::vector<Vec> pts;
    pts.reserve(static_cast<std::size_t>(npts));
    pts.push_back(map(mean));
    for (Eigen::Index i = 0; i < mean.size(); ++i) pts.push_back(map(mean + sqrt_cov.col(i)));
    for (Eigen::Index i = 0; i < mean.size(); ++i) pts.push_back(map(mean - sqrt_cov.col(i)));

    Vec out_mean = wm0 * pts[0];
    for (std::size_t k = 1; k < pts.size(); ++k) out_mean += wi * pts[k];

    const auto m = out_mean.size();
    Mat out_cov = Mat::Zero(m, m);
    for (std::size_t k = 0; k < pts.size(); ++k) {
        const Vec d = pts[k] - out_mean;
        out_cov += (k == 0 ? wc0 : wi) * d * d.transpose();
    }
    return UtResult{out_mean, repair_spd(out_cov)};
}

UtResult unscented_transform(const GaussianComponent& comp, const VectorMap& map, const UtParams& params) {
    return unscented_transform(comp.mean, comp.cov, map, params);
}

Projection project_to_for(const GaussianComponent& comp, const astro::StateVector& observer) {
    const Vec3 pos = comp.mean.head<3>();
    const auto z = astro::measure_radec(pos, observer.position);
    const Mat26 h6 = astro::measurement_jacobian(pos, observer.position);
    Mat jac = Mat::Zero(2, comp.mean.size());
    jac.leftCols(6) = h6;
    Mat2 p = jac * comp.cov * jac.transpose();
    p = 0.5 * (p + p.transpose());
    return Projection{z.vec(), p, jac};
}

Projector radec_projector(const astro::StateVector& observer) {
    return [observer](const GaussianComponent& c) { return project_to_for(c, observer); };
}

FovDistance mahalanobis_to_fov(const Vec2& mean, const Mat2& cov, const FovRect& fov) {
    const Vec2 mu = fov.unwrap(mean);
    Eigen::SelfAdjointEigenSolver<Mat2> eig(0.5 * (cov + cov.transpose()));
    Vec2 lam = eig.eigenvalues();
    const double tiny = std::numeric_limits<double>::min();
    for (int i = 0; i < 2; ++i) lam(i) = std::max(lam(i), tiny);
    const Mat2 whiten = lam.cwiseSqrt().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();

    const auto verts = fov.vertices();
    std::array<Vec2, 4> b;
    for (int i = 0; i < 4; ++i) b[i] = whiten * (verts[i] - mu);

    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 4; ++i) {
        const Vec2& bi = b[i];
        const Vec2& bj = b[(i + 1) % 4];
        const Vec2 bij = bj - bi;
        const double len2 = bij.squaredNorm();
        Vec2 o = bi;
        if (len2 > 0.0) {
            const Vec2 foot = bi - (bi.dot(bij) / len2) * bij;
            if ((bi - foot).dot(bj - foot) <= 0.0)
                o = foot;
            else if (bi.norm() < bj.norm())
                o = bi;
            else
                o = bj;
        }
        best = std::min(best, o.norm());
    }
    return FovDistance{best, fov.contains(mu)};
}

SplitDirection select_split_direction(const GaussianComponent& comp, const Mat& jacobian) {
    Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (comp.cov + comp.cov.transpose()));
    if (eig.info() != Eigen::Success) throw NumericalError("select_split_direction: eigendecomposition failed");
    const Mat projected = jacobian * comp.cov * jacobian.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> peig(0.5 * (projected + projected.transpose()));
    const Vec vmax = peig.eigenvectors().col(peig.eigenvalues().size() - 1);

    SplitDirection best;
    double best_score = -1.0;
    for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
        const double lam = std::max(eig.eigenvalues()(i), 0.0);
        const double score = std::abs(std::sqrt(lam) * vmax.dot(jacobian * eig.eigenvectors().col(i)));
        if (score > best_score) {
            best_score = score;
            best = SplitDirection{eig.eigenvectors().col(i), lam, static_cast<int>(i)};
        }
    }
    return best;
}

GaussianMixture split_component(const GaussianComponent& comp, const SplitDirection& dir, const SplitLibrary& lib) {
    GaussianMixture out(static_cast<int>(comp.mean.size()));
    const double sd = std::sqrt(dir.eigenvalue);
    const Mat outer = dir.eigenvalue * dir.direction * dir.direction.transpose();
    for (std::size_t i = 0; i < lib.size(); ++i) {
        GaussianComponent c;
        c.weight = lib.alphas[i] * comp.weight;
        c.mean = comp.mean + sd * lib.means[i] * dir.direction;
        c.cov = comp.cov + (lib.sigmas[i] * lib.sigmas[i] - 1.0) * outer;
        c.cov = 0.5 * (c.cov + c.cov.transpose());
        out.components.push_back(std::move(c));
    }
    return out;
}

namespace {

void split_recursive(const GaussianComponent& comp, int depth, const FovRect& fov, const Projector& project,
                     const SplitOptions& opts, const SplitLibrary& lib, GaussianMixture& out) {
    const Projection proj = project(comp);
    const auto dist = mahalanobis_to_fov(proj.mean, proj.cov, fov);
    if (dist.distance > opts.d_mahalanobis || depth >= opts.max_depth) {
        out.components.push_back(comp);
        if (out.size() > opts.max_components) {
            std::ostringstream msg;
            msg << "recursive_fov_split: more than " << opts.max_components
                << " components; splitting threshold too aggressive";
            throw NumericalError(msg.str());
        }
        return;
    }
    const auto dir = select_split_direction(comp, proj.jacobian);
    for (const auto& child : split_component(comp, dir, lib).components)
        split_recursive(child, depth + 1, fov, project, opts, lib, out);
}

}  // namespace

GaussianMixture recursive_fov_split(const GaussianMixture& mix, const FovRect& fov, const Projector& project,
                                    const SplitOptions& opts, const SplitLibrary& lib) {
    if (!(opts.d_mahalanobis > 0.0)) throw InvalidInput("recursive_fov_split: d_M must be positive");
    GaussianMixture out(mix.dim);
    out.components.reserve(mix.size());
    for (const auto& c : mix.components) split_recursive(c, 0, fov, project, opts, lib, out);
    return out;
}

GaussianMixture recursive_fov_split(const GaussianMixture& mix, const FovRect& fov,
                                    const astro::StateVector& observer, const SplitOptions& opts) {
    return recursive_fov_split(mix, fov, radec_projector(observer), opts);
}

double log_gaussian(const Vec& x, const Vec& mean, const Mat& cov) {
    Eigen::LLT<Mat> llt(cov);
    if (llt.info() != Eigen::Success) throw NumericalError("log_gaussian: covariance not SPD");
    const Vec d = x - mean;
    const Vec y = llt.matrixL().solve(d);
    const Mat& l = llt.matrixL().toDenseMatrix();
    const double logdet = 2.0 * l.diagonal().array().log().sum();
    return -0.5 * (y.squaredNorm() + logdet + static_cast<double>(x.size()) * std::log(kTwoPi));
}

double log_gaussian(const Vec2& x, const Vec2& mean, const Mat2& cov) {
    const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
    if (!(det > 0.0)) throw NumericalError("log_gaussian: 2x2 covariance not SPD");
    const Vec2 d = x - mean;
    const double q = (cov(1, 1) * d(0) * d(0) - 2.0 * cov(0, 1) * d(0) * d(1) + cov(0, 0) * d(1) * d(1)) / det;
    return -0.5 * (q + std::log(det)) - std::log(kTwoPi);
}

double log_sum_exp(const std::vector<double>& v) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : v) mx = std::max(mx, x);
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

double gmm_l2_distance(const GaussianMixture& p, const GaussianMixture& q) {
    if (!p.empty() && !q.empty() && p.dim != q.dim) throw InvalidInput("gmm_l2_distance: dimension mismatch");
    auto cross = [](const GaussianMixture& a, const GaussianMixture& b) {
        double s = 0.0;
        for (const auto& ca : a.components)
            for (const auto& cb : b.components)
                s += ca.weight * cb.weight * std::exp(log_gaussian(ca.mean, cb.mean, Mat(ca.cov + cb.cov)));
        return s;
    };
    return std::max(cross(p, p) + cross(q, q) - 2.0 * cross(p, q), 0.0);
}

GaussianMixture prune_and_merge(const GaussianMixture& mix, const PruneOptions& opts) {
    if (opts.weight_floor < 0.0 || opts.merge_distance < 0.0)
        throw InvalidInput("prune_and_merge: thresholds must be nonnegative");
    const double total = mix.total_weight();

    std::vector<std::size_t> order;
    order.reserve(mix.size());
    for (std::size_t i = 0; i < mix.size(); ++i)
        if (mix.components[i].weight >= opts.weight_floor) order.push_back(i);
    if (order.empty()) return mix;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return mix.components[a].weight > mix.components[b].weight;
    });

    const double gate2 = opts.merge_distance * opts.merge_distance;
    std::vector<char> used(mix.size(), 0);
    GaussianMixture out(mix.dim);
    for (std::size_t oi = 0; oi < order.size(); ++oi) {
        const std::size_t head = order[oi];
        if (used[head]) continue;
        const auto& hc = mix.components[head];
        used[head] = 1;

        std::vector<std::size_t> cluster{head};
        if (gate2 > 0.0) {
            Eigen::LLT<Mat> llt(hc.cov);
            const Vec sd = hc.cov.diagonal().cwiseSqrt();
            for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
                const std::size_t j = order[oj];
                if (used[j]) continue;
                const Vec d = mix.components[j].mean - hc.mean;
                // x^T P^-1 x >= x_k^2 / P_kk rules out most candidates cheaply.
                bool far = false;
                for (Eigen::Index k = 0; k < d.size(); ++k) {
                    if (std::abs(d(k)) > opts.merge_distance * sd(k)) {
                        far = true;
                        break;
                    }
                }
                if (far) continue;
                if (llt.matrixL().solve(d).squaredNorm() <= gate2) {
                    cluster.push_back(j);
                    used[j] = 1;
                }
            }
        }

        if (cluster.size() == 1) {
            out.components.push_back(hc);
            continue;
        }
        GaussianComponent merged;
        merged.weight = 0.0;
        merged.mean = Vec::Zero(mix.dim);
        for (auto j : cluster) {
            merged.weight += mix.components[j].weight;
            merged.mean += mix.components[j].weight * mix.components[j].mean;
        }
        merged.mean /= merged.weight;
        merged.cov = Mat::Zero(mix.dim, mix.dim);
        for (auto j : cluster) {
            const auto& c = mix.components[j];
            const Vec d = c.mean - merged.mean;
            merged.cov += c.weight * (c.cov + d * d.transpose());
        }
        merged.cov /= merged.weight;
        merged.cov = 0.5 * (merged.cov + merged.cov.transpose());
        out.components.push_back(std::move(merged));
    }

    if (out.size() > opts.max_components) {
        std::stable_sort(out.components.begin(), out.components.end(),
                         [](const auto& a, const auto& b) { return a.weight > b.weight; });
        out.components.resize(opts.max_components);
    }
    const double kept = out.total_weight();
    if (kept > 0.0) {
        const double scale = total / kept;
        for (auto& c : out.components) c.weight *= scale;
    }
    return out;
}

}  // namespace seeker::gmm
