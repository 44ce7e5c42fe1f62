#include "seeker/reward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace seeker::reward {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kMaxExistence = 1.0 - 1e-9;

Mat2 cholesky2(const Mat2& cov) {
    Eigen::LLT<Mat2> llt(cov);
    if (llt.info() != Eigen::Success) {
        llt.compute(Mat2(gmm::repair_spd(Mat(cov))));
        if (llt.info() != Eigen::Success) throw NumericalError("reward: measurement covariance not SPD");
    }
    return llt.matrixL();
}

Vec2 draw_measurement(const Vec2& mean, const Mat2& chol, Rng& rng) {
    std::normal_distribution<double> n01;
    const double a = n01(rng);
    const double b = n01(rng);
    Vec2 z = mean + chol * Vec2(a, b);
    z.x() = astro::wrap_two_pi(z.x());
    return z;
}

// k distinct indices out of [0, n), in draw order.
std::vector<std::size_t> choose_distinct(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(k);
    return idx;
}

std::size_t count_at(std::span<const double> pmf, double u) {
    double acc = 0.0;
    for (std::size_t n = 0; n < pmf.size(); ++n) {
        acc += pmf[n];
        if (u < acc) return n;
    }
    // Rounding left a sliver of mass at the top; return the last supported count.
    for (std::size_t n = pmf.size(); n-- > 0;)
        if (pmf[n] > 0.0) return n;
    return 0;
}

// Zero out target counts no cardinality hypothesis can produce when each
// target is detected with probability p_det, then renormalize.
void drop_infeasible_counts(std::vector<double>& pmf, const cphd::CardinalityPmf& prior, double p_det) {
    std::vector<double> kept(pmf.size(), 0.0);
    double total = 0.0;
    for (std::size_t k = 0; k < pmf.size(); ++k) {
        if (!(pmf[k] > 0.0) || (k > 0 && !(p_det > 0.0))) continue;
        bool ok = false;
        for (std::size_t n = k; n < prior.probs.size() && !ok; ++n)
            ok = prior.probs[n] > 0.0 && (n == k || p_det < 1.0);
        if (ok) {
            kept[k] = pmf[k];
            total += pmf[k];
        }
    }
    if (total > 0.0) {
        for (auto& v : kept) v /= total;
        pmf = std::move(kept);
    }
}

double cardinality_affinity(const cphd::CardinalityPmf& prior, const cphd::CardinalityPmf& post, double alpha) {
    const std::size_t n = std::max(prior.probs.size(), post.probs.size());
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = i < prior.probs.size() ? prior.probs[i] : 0.0;
        const double s = i < post.probs.size() ? post.probs[i] : 0.0;
        den += p;
        if (p > 0.0 && s > 0.0) num += p * std::pow(s / p, alpha);
    }
    return den > 0.0 ? num / den : 0.0;
}

double reward_from_terms(double card_term, double bracket, double alpha) {
    const double inner = card_term * bracket;
    if (!(inner > 0.0)) return std::numeric_limits<double>::infinity();
    return std::log(inner) / (alpha - 1.0);
}

KnnIndex knn_index(const ParticleCloud& cloud, std::size_t ell, bool parallel) {
    const std::size_t n = cloud.size();
    if (n == 0) throw InvalidInput("build_knn: empty cloud");
    Vec6 mean = Vec6::Zero();
    for (const auto& x : cloud.states) mean += x;
    mean /= static_cast<double>(n);
    Vec6 var = Vec6::Zero();
    for (const auto& x : cloud.states) var += (x - mean).cwiseAbs2();
    var /= static_cast<double>(n);
    Vec6 scale;
    for (int d = 0; d < 6; ++d) scale(d) = var(d) > 0.0 ? std::sqrt(var(d)) : 1.0;

    std::vector<Vec6> scaled(n);
    for (std::size_t i = 0; i < n; ++i) scaled[i] = (cloud.states[i] - mean).cwiseQuotient(scale);
    auto table = parallel ? kernels::knn_parallel(scaled, ell) : kernels::knn_serial(scaled, ell);
    KnnIndex idx;
    idx.ell = table.ell;
    idx.neighbors = std::move(table.neighbors);
    idx.radius = std::move(table.radius);
    idx.scale = scale;
    idx.degenerate = table.degenerate;
    return idx;
}

// Log-likelihood of z under particle measurement mean zhat and noise R.
double log_particle_likelihood(const Vec2& z, const Vec2& zhat, const RewardContext& ctx) {
    Vec2 d = z - zhat;
    d.x() = astro::wrap_pi(d.x());
    return ctx.noise_log_norm - 0.5 * d.dot(ctx.noise_inv * d);
}

// Clutter spatial term log c(z) = log(kappa(z) / N_kappa_fov); 0 with no in-FOV clutter.
std::vector<double> log_clutter_density(const cphd::MeasurementSet& zset, const ClutterMeasurementModel& clutter,
                                        std::span<const std::size_t> clutter_in_fov) {
    std::vector<double> log_c(zset.size(), 0.0);
    if (clutter_in_fov.empty()) return log_c;
    std::vector<double> terms(clutter_in_fov.size());
    for (std::size_t k = 0; k < zset.size(); ++k) {
        for (std::size_t c = 0; c < clutter_in_fov.size(); ++c) {
            const auto& comp = clutter.components.components[clutter_in_fov[c]];
            terms[c] = cphd::log_angle_likelihood(zset.z[k].vec(), comp.mean, Mat2(comp.cov));
        }
        log_c[k] = gmm::log_sum_exp(terms) - std::log(static_cast<double>(clutter_in_fov.size()));
    }
    return log_c;
}

// Posterior intensity weights of the in-FOV particles (aligned with in_fov)
// and the common weight of every particle outside the FOV.
struct CompactPosterior {
    std::vector<double> inside;
    double outside = 0.0;
    cphd::CardinalityPmf cardinality;
};

CompactPosterior compact_update(std::size_t n_total, std::span<const std::size_t> in_fov,
                                std::span<const Vec2> projected, const cphd::MeasurementSet& zset, double p_d,
                                const ClutterMeasurementModel& clutter, std::span<const std::size_t> clutter_in_fov,
                                const cphd::CardinalityPmf& prior, const RewardContext& ctx) {
    const std::size_t m = zset.size();
    const std::size_t nf = in_fov.size();
    const double log_w0 = -std::log(static_cast<double>(n_total));  // normalized prior weight 1/N
    const double log_pd = p_d > 0.0 ? std::log(p_d) : kNegInf;
    const double pd_eff = nf > 0 ? p_d : 0.0;

    const auto log_c = log_clutter_density(zset, clutter, clutter_in_fov);
    const auto clutter_pmf = cphd::clutter_cardinality(clutter_in_fov.size(), clutter.p_d);

    std::vector<double> log_g(nf * m);
    std::vector<double> log_xi(m, kNegInf);
    std::vector<double> terms(nf);
    for (std::size_t k = 0; k < m; ++k) {
        const Vec2 z = zset.z[k].vec();
        for (std::size_t f = 0; f < nf; ++f) {
            log_g[f * m + k] = log_particle_likelihood(z, projected[in_fov[f]], ctx);
            terms[f] = log_g[f * m + k];
        }
        if (nf > 0) log_xi[k] = gmm::log_sum_exp(terms) + log_w0 + log_pd - log_c[k];
    }
    const double missed = 1.0 - pd_eff * static_cast<double>(nf) / static_cast<double>(n_total);
    const auto corr = cphd::cphd_correction(prior.probs, clutter_pmf.probs, log_xi, missed);

    CompactPosterior out;
    out.cardinality.probs = corr.posterior;
    const double w0 = 1.0 / static_cast<double>(n_total);
    out.outside = w0 * std::exp(corr.log_missed);
    out.inside.assign(nf, w0 * (1.0 - pd_eff) * std::exp(corr.log_missed));
    if (pd_eff > 0.0) {
        for (std::size_t f = 0; f < nf; ++f) {
            for (std::size_t k = 0; k < m; ++k) {
                const double lw = log_w0 + log_pd + log_g[f * m + k] - log_c[k] + corr.log_detected[k];
                out.inside[f] += std::exp(lw);
            }
        }
    }
    return out;
}

RewardContext likelihood_only_context(const Mat2& noise) {
    RewardContext ctx;
    ctx.noise = noise;
    ctx.noise_chol = cholesky2(noise);
    ctx.noise_inv = noise.inverse();
    ctx.noise_log_norm = -std::log(kTwoPi) - 0.5 * std::log(noise.determinant());
    return ctx;
}

}  // namespace

ClutterMeasurementModel clutter_measurement_model(const cphd::ClutterModel& clutter,
                                                  const astro::StateVector& observer, const Mat2& noise) {
    ClutterMeasurementModel out;
    out.components = cphd::clutter_intensity(clutter, observer, noise);
    out.p_d = clutter.p_d;
    out.chol.reserve(out.components.size());
    for (const auto& c : out.components.components) out.chol.push_back(cholesky2(Mat2(c.cov)));
    return out;
}

ParticleCloud sample_particles(const gmm::GaussianMixture& intensity, std::size_t n_samp, Rng& rng) {
    if (intensity.empty()) throw InvalidInput("sample_particles: empty mixture");
    if (n_samp == 0) throw InvalidInput("sample_particles: n_samp must be positive");
    const double total = intensity.total_weight();
    if (!(total > 0.0)) throw InvalidInput("sample_particles: mixture has zero weight");

    const auto& comps = intensity.components;
    std::vector<double> weights(comps.size());
    std::vector<Mat> chol(comps.size());
    for (std::size_t c = 0; c < comps.size(); ++c) {
        weights[c] = std::max(comps[c].weight, 0.0);
        if (weights[c] == 0.0) continue;
        Eigen::LLT<Mat> llt(comps[c].cov);
        if (llt.info() != Eigen::Success) {
            llt.compute(gmm::repair_spd(comps[c].cov));
            if (llt.info() != Eigen::Success) throw NumericalError("sample_particles: covariance not SPD");
        }
        chol[c] = llt.matrixL();
    }

    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    std::normal_distribution<double> n01;
    ParticleCloud cloud;
    cloud.states.resize(n_samp);
    cloud.prior_weights.assign(n_samp, 1.0 / static_cast<double>(n_samp));
    cloud.expected_count = total;
    Vec6 e;
    for (std::size_t i = 0; i < n_samp; ++i) {
        const std::size_t c = pick(rng);
        for (int d = 0; d < 6; ++d) e(d) = n01(rng);
        cloud.states[i] = comps[c].mean + chol[c] * e;
    }
    return cloud;
}

void project_particles(ParticleCloud& cloud, const astro::StateVector& observer) {
    cloud.projected.resize(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i)
        cloud.projected[i] = astro::measure_radec(Vec3(cloud.states[i].head<3>()), observer.position).vec();
}

KnnIndex build_knn(const ParticleCloud& cloud, std::size_t ell) { return knn_index(cloud, ell, true); }
KnnIndex build_knn_serial(const ParticleCloud& cloud, std::size_t ell) { return knn_index(cloud, ell, false); }

std::vector<std::size_t> particles_in_fov(const ParticleCloud& cloud, const gmm::FovRect& fov) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < cloud.projected.size(); ++i)
        if (fov.contains(cloud.projected[i])) idx.push_back(i);
    return idx;
}

ParticlePosterior particle_update_weights(const ParticleCloud& cloud, std::span<const std::size_t> in_fov,
                                          const cphd::MeasurementSet& z, double p_d,
                                          const ClutterMeasurementModel& clutter,
                                          std::span<const std::size_t> clutter_in_fov,
                                          const cphd::CardinalityPmf& prior) {
    if (cloud.size() == 0) throw InvalidInput("particle_update_weights: empty cloud");
    if (cloud.projected.size() != cloud.size()) throw InvalidInput("particle_update_weights: cloud not projected");
    const auto ctx = likelihood_only_context(z.noise);
    const auto post = compact_update(cloud.size(), in_fov, cloud.projected, z, p_d, clutter, clutter_in_fov, prior, ctx);
    ParticlePosterior out;
    out.cardinality = post.cardinality;
    out.weights.assign(cloud.size(), post.outside);
    for (std::size_t f = 0; f < in_fov.size(); ++f) out.weights[in_fov[f]] = post.inside[f];
    return out;
}

ParticlePosterior particle_update_weights(const ParticleCloud& cloud, const cphd::MeasurementSet& z,
                                          const cphd::DetectionModel& det, const cphd::ClutterModel& clutter,
                                          const cphd::CardinalityPmf& prior) {
    ParticleCloud projected = cloud;
    project_particles(projected, det.observer);
    const auto in_fov = det.p_d > 0.0 ? particles_in_fov(projected, det.fov) : std::vector<std::size_t>{};
    const auto cm = clutter_measurement_model(clutter, det.observer, z.noise);
    const auto clutter_fov = cphd::catalog_in_fov(cm.components, det.fov);
    return particle_update_weights(projected, in_fov, z, det.p_d, cm, clutter_fov, prior);
}

double renyi_reward(std::span<const double> prior_weights, std::span<const double> posterior_weights,
                    const cphd::CardinalityPmf& prior_card, const cphd::CardinalityPmf& posterior_card,
                    const KnnIndex& knn, double alpha) {
    const std::size_t n = prior_weights.size();
    if (posterior_weights.size() != n || knn.radius.size() != n)
        throw InvalidInput("renyi_reward: size mismatch");
    if (!(alpha > 0.0) || alpha == 1.0) throw InvalidInput("renyi_reward: alpha must be positive and not 1");
    const double prior_sum = std::accumulate(prior_weights.begin(), prior_weights.end(), 0.0);
    const double post_sum = std::accumulate(posterior_weights.begin(), posterior_weights.end(), 0.0);
    if (!(prior_sum > 0.0) || post_sum < 0.0) throw InvalidInput("renyi_reward: weights must have positive mass");
    const double card = cardinality_affinity(prior_card, posterior_card, alpha);
    // No posterior intensity: only n = 0 survives, so the spatial term drops out.
    if (!(post_sum > 0.0)) return reward_from_terms(card, 1.0, alpha);

    std::vector<double> ratio(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double p = prior_weights[j] / prior_sum;
        const double s = posterior_weights[j] / post_sum;
        ratio[j] = p > 0.0 ? s / p : 0.0;
    }
    double bracket = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (auto j : knn.of(i)) acc += ratio[j];
        const double local = acc / static_cast<double>(knn.ell);
        if (local > 0.0) bracket += std::pow(local, alpha);
    }
    bracket /= static_cast<double>(n);
    return reward_from_terms(card, bracket, alpha);
}

std::vector<double> multi_bernoulli_count_pmf(std::span<const double> q, std::size_t max_count) {
    std::vector<double> e(max_count + 1, 0.0);
    e[0] = 1.0;
    double log_none = 0.0;
    std::size_t seen = 0;
    for (double qi : q) {
        if (!(qi >= 0.0)) throw InvalidInput("multi_bernoulli_count_pmf: negative probability");
        if (qi == 0.0) continue;
        const double qc = std::min(qi, kMaxExistence);
        const double odds = qc / (1.0 - qc);
        log_none += std::log1p(-qc);
        ++seen;
        for (std::size_t j = std::min(seen, max_count); j >= 1; --j) e[j] += odds * e[j - 1];
    }
    // Rescale in log space: the odds products can be huge while prod(1 - q) is tiny.
    std::vector<double> pmf(max_count + 1, 0.0);
    double s = 0.0;
    for (std::size_t j = 0; j <= max_count; ++j) {
        pmf[j] = e[j] > 0.0 ? std::exp(std::log(e[j]) + log_none) : 0.0;
        s += pmf[j];
    }
    if (!(s > 0.0)) {
        pmf.assign(max_count + 1, 0.0);
        pmf[std::min(seen, max_count)] = 1.0;
        return pmf;
    }
    for (double& p : pmf) p /= s;
    return pmf;
}

RewardContext prepare_reward_context(const cphd::CphdState& predicted, const cphd::ClutterModel& clutter,
                                     const astro::StateVector& observer, const Mat2& noise, double p_d,
                                     const RewardConfig& cfg, Rng& rng) {
    if (!(p_d >= 0.0 && p_d <= 1.0)) throw InvalidInput("prepare_reward_context: p_d outside [0, 1]");
    RewardContext ctx = likelihood_only_context(noise);
    ctx.p_d = p_d;
    ctx.prior_cardinality = predicted.cardinality;
    ctx.cloud = sample_particles(predicted.intensity, cfg.n_samp, rng);
    ctx.cloud.expected_count = predicted.cardinality.mean();
    project_particles(ctx.cloud, observer);
    ctx.knn = build_knn(ctx.cloud, cfg.ell);
    ctx.clutter = clutter_measurement_model(clutter, observer, noise);

    ctx.reverse_neighbors.assign(ctx.cloud.size(), {});
    for (std::size_t i = 0; i < ctx.cloud.size(); ++i)
        for (auto j : ctx.knn.of(i)) ctx.reverse_neighbors[j].push_back(static_cast<std::uint32_t>(i));
    return ctx;
}

ActionView view_action(const Action& action, const RewardContext& ctx) {
    ActionView view;
    if (ctx.p_d > 0.0) view.particles = particles_in_fov(ctx.cloud, action.fov);
    view.catalog = cphd::catalog_in_fov(ctx.clutter.components, action.fov);

    std::vector<char> mark(ctx.cloud.size(), 0);
    for (auto j : view.particles)
        for (auto i : ctx.reverse_neighbors[j]) mark[i] = 1;
    for (std::size_t i = 0; i < mark.size(); ++i)
        if (mark[i]) view.affected.push_back(i);

    const double q = ctx.p_d * ctx.cloud.expected_count / static_cast<double>(ctx.cloud.size());
    const std::vector<double> qs(view.particles.size(), q);
    view.target_count_pmf = multi_bernoulli_count_pmf(qs, ctx.prior_cardinality.max_count());
    const double in_share = static_cast<double>(view.particles.size()) / static_cast<double>(ctx.cloud.size());
    drop_infeasible_counts(view.target_count_pmf, ctx.prior_cardinality, std::min(ctx.p_d * in_share, 1.0));
    return view;
}

cphd::MeasurementSet sample_measurement_set(const ActionView& view, const RewardContext& ctx, Rng& rng) {
    cphd::MeasurementSet z;
    z.noise = ctx.noise;

    // The count uniform is always drawn first, so equal streams give monotonically coupled counts across actions.
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double u = u01(rng);
    std::size_t nt = 0;
    if (!view.particles.empty()) nt = std::min(count_at(view.target_count_pmf, u), view.particles.size());

    if (!view.catalog.empty() && ctx.clutter.p_d > 0.0) {
        std::binomial_distribution<std::size_t> count(view.catalog.size(), ctx.clutter.p_d);
        const std::size_t nc = count(rng);
        for (auto c : choose_distinct(view.catalog.size(), nc, rng)) {
            const std::size_t k = view.catalog[c];
            const Vec2 v = draw_measurement(ctx.clutter.components.components[k].mean, ctx.clutter.chol[k], rng);
            z.z.push_back({v.x(), v.y()});
        }
    }
    for (auto f : choose_distinct(view.particles.size(), nt, rng)) {
        const Vec2 v = draw_measurement(ctx.cloud.projected[view.particles[f]], ctx.noise_chol, rng);
        z.z.push_back({v.x(), v.y()});
    }
    return z;
}

cphd::MeasurementSet sample_measurement_set(const Action& action, const RewardContext& ctx, Rng& rng) {
    return sample_measurement_set(view_action(action, ctx), ctx, rng);
}

double measurement_set_reward(const ActionView& view, const RewardContext& ctx, const cphd::MeasurementSet& z,
                              double alpha, bool reference) {
    const std::size_t n = ctx.cloud.size();
    const auto post = compact_update(n, view.particles, ctx.cloud.projected, z, ctx.p_d, ctx.clutter, view.catalog,
                                     ctx.prior_cardinality, ctx);
    const double card = cardinality_affinity(ctx.prior_cardinality, post.cardinality, alpha);

    if (reference) {
        std::vector<double> weights(n, post.outside);
        for (std::size_t f = 0; f < view.particles.size(); ++f) weights[view.particles[f]] = post.inside[f];
        if (view.particles.empty()) weights = ctx.cloud.prior_weights;
        return renyi_reward(ctx.cloud.prior_weights, weights, ctx.prior_cardinality, post.cardinality, ctx.knn,
                            alpha);
    }

    if (view.particles.empty()) return reward_from_terms(card, 1.0, alpha);

    const double total = post.outside * static_cast<double>(n - view.particles.size()) +
                         std::accumulate(post.inside.begin(), post.inside.end(), 0.0);
    if (!(total > 0.0)) return reward_from_terms(card, 1.0, alpha);
    const double dn = static_cast<double>(n);
    const double r_out = post.outside / total * dn;
    std::vector<double> ratio(n, r_out);
    for (std::size_t f = 0; f < view.particles.size(); ++f) ratio[view.particles[f]] = post.inside[f] / total * dn;

    const double dl = static_cast<double>(ctx.knn.ell);
    double bracket = r_out > 0.0 ? static_cast<double>(n - view.affected.size()) * std::pow(r_out, alpha) : 0.0;
    for (auto i : view.affected) {
        double acc = 0.0;
        for (auto j : ctx.knn.of(i)) acc += ratio[j];
        const double local = acc / dl;
        if (local > 0.0) bracket += std::pow(local, alpha);
    }
    return reward_from_terms(card, bracket / dn, alpha);
}

double expected_reward(const Action& action, const RewardContext& ctx, const RewardConfig& cfg, Rng& rng) {
    const auto view = view_action(action, ctx);
    std::vector<std::uint64_t> trial_seeds(cfg.n_trials);
    for (auto& t : trial_seeds) t = rng();
    if (view.particles.empty() && view.catalog.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t t = 0; t < cfg.n_trials; ++t) {
        Rng trial(trial_seeds[t]);
        const auto z = sample_measurement_set(view, ctx, trial);
        acc += measurement_set_reward(view, ctx, z, cfg.alpha);
    }
    return acc / static_cast<double>(cfg.n_trials);
}

namespace {

Selection select_impl(std::span<const Action> actions, const RewardContext& ctx, const RewardConfig& cfg,
                      std::uint64_t scan_index, bool parallel) {
    if (actions.empty()) throw InvalidInput("select_action: no actions");
    const auto f = [&](std::size_t k) {
        Rng rng = make_rng({cfg.seed, tag(Stream::reward), scan_index});
        return expected_reward(actions[k], ctx, cfg, rng);
    };
    Selection sel;
    sel.rewards = parallel ? kernels::map_indices_parallel(actions.size(), f)
                           : kernels::map_indices_serial(actions.size(), f);
    sel.index = kernels::argmax_first(sel.rewards);
    return sel;
}

}  // namespace

Selection select_action(std::span<const Action> actions, const RewardContext& ctx, const RewardConfig& cfg,
                        std::uint64_t scan_index) {
    return select_impl(actions, ctx, cfg, scan_index, true);
}

Selection select_action_serial(std::span<const Action> actions, const RewardContext& ctx, const RewardConfig& cfg,
                               std::uint64_t scan_index) {
    return select_impl(actions, ctx, cfg, scan_index, false);
}

}  // namespace seeker::reward
