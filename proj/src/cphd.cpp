#include "seeker/cphd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

namespace seeker::cphd {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

// log of the normalized Upsilon^u[Z'](n) for every n, given log e_j of Z'.
std::vector<double> log_upsilon(std::size_t n_max, int u, std::span<const double> log_e,
                                std::span<const double> log_clutter, double log_q) {
    const std::size_t m = log_e.size() - 1;  // |Z'|
    std::vector<double> out(n_max + 1, kNegInf);
    for (std::size_t n = 0; n <= n_max; ++n) {
        double acc = kNegInf;
        for (std::size_t j = 0; j <= std::min(m, n); ++j) {
            if (j + static_cast<std::size_t>(u) > n) break;
            const std::size_t nc = m - j;
            if (nc >= log_clutter.size() || log_clutter[nc] == kNegInf || log_e[j] == kNegInf) continue;
            const std::size_t power = n - j - static_cast<std::size_t>(u);
            double term = std::lgamma(static_cast<double>(nc) + 1.0) + log_clutter[nc] +
                          std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(power) + 1.0) +
                          log_e[j];
            if (power > 0) {
                if (log_q == kNegInf) continue;
                term += static_cast<double>(power) * log_q;
            }
            acc = log_add(acc, term);
        }
        out[n] = acc;
    }
    return out;
}

double log_inner(std::span<const double> log_u, std::span<const double> log_rho) {
    double acc = kNegInf;
    for (std::size_t n = 0; n < log_u.size(); ++n) acc = log_add(acc, log_u[n] + log_rho[n]);
    return acc;
}

}  // namespace

double CardinalityPmf::mean() const {
    double m = 0.0;
    for (std::size_t n = 0; n < probs.size(); ++n) m += static_cast<double>(n) * probs[n];
    return m;
}

std::size_t CardinalityPmf::map() const {
    std::size_t best = 0;
    for (std::size_t n = 1; n < probs.size(); ++n)
        if (probs[n] > probs[best]) best = n;
    return best;
}

double CardinalityPmf::sum() const {
    double s = 0.0;
    for (double p : probs) s += p;
    return s;
}

void CardinalityPmf::normalize() {
    const double s = sum();
    if (!(s > 0.0)) throw NumericalError("CardinalityPmf: zero mass");
    for (double& p : probs) p /= s;
}

CardinalityPmf CardinalityPmf::point(std::size_t n, std::size_t n_max) {
    if (n > n_max) throw InvalidInput("CardinalityPmf::point: n exceeds n_max");
    CardinalityPmf pmf{std::vector<double>(n_max + 1, 0.0)};
    pmf.probs[n] = 1.0;
    return pmf;
}

CardinalityPmf CardinalityPmf::poisson(double mean, std::size_t n_max) {
    if (!(mean >= 0.0)) throw InvalidInput("CardinalityPmf::poisson: negative mean");
    CardinalityPmf pmf{std::vector<double>(n_max + 1, 0.0)};
    for (std::size_t n = 0; n <= n_max; ++n) {
        const double dn = static_cast<double>(n);
        pmf.probs[n] = mean > 0.0 ? std::exp(dn * std::log(mean) - mean - std::lgamma(dn + 1.0)) : (n == 0 ? 1.0 : 0.0);
    }
    pmf.normalize();
    return pmf;
}

CardinalityPmf CardinalityPmf::uniform(std::size_t upper, std::size_t n_max) {
    if (upper > n_max) throw InvalidInput("CardinalityPmf::uniform: upper exceeds n_max");
    CardinalityPmf pmf{std::vector<double>(n_max + 1, 0.0)};
    for (std::size_t n = 0; n <= upper; ++n) pmf.probs[n] = 1.0 / static_cast<double>(upper + 1);
    return pmf;
}

std::vector<double> esf(std::span<const double> values) {
    std::vector<double> e(values.size() + 1, 0.0);
    e[0] = 1.0;
    for (std::size_t k = 0; k < values.size(); ++k)
        for (std::size_t j = k + 1; j >= 1; --j) e[j] += values[k] * e[j - 1];
    return e;
}

std::vector<double> log_esf(std::span<const double> log_values) {
    std::vector<double> e(log_values.size() + 1, kNegInf);
    e[0] = 0.0;
    for (std::size_t k = 0; k < log_values.size(); ++k)
        for (std::size_t j = k + 1; j >= 1; --j) e[j] = log_add(e[j], log_values[k] + e[j - 1]);
    return e;
}

CphdCorrection cphd_correction(std::span<const double> prior, std::span<const double> clutter_pmf,
                               std::span<const double> log_xi, double missed_fraction) {
    if (prior.empty()) throw InvalidInput("cphd_correction: empty prior cardinality");
    const std::size_t n_max = prior.size() - 1;
    std::vector<double> log_rho(prior.size()), log_clutter(clutter_pmf.size());
    std::transform(prior.begin(), prior.end(), log_rho.begin(), safe_log);
    std::transform(clutter_pmf.begin(), clutter_pmf.end(), log_clutter.begin(), safe_log);
    const double log_q = safe_log(std::clamp(missed_fraction, 0.0, 1.0));

    const auto log_e = log_esf(log_xi);
    const auto u0 = log_upsilon(n_max, 0, log_e, log_clutter, log_q);
    const double log_den = log_inner(u0, log_rho);
    if (log_den == kNegInf || !std::isfinite(log_den))
        throw NumericalError("cphd update: zero normalization (measurement set inconsistent with model)");

    CphdCorrection out;
    out.posterior.resize(prior.size());
    for (std::size_t n = 0; n <= n_max; ++n) out.posterior[n] = std::exp(u0[n] + log_rho[n] - log_den);
    double s = 0.0;
    for (double p : out.posterior) s += p;
    for (double& p : out.posterior) p /= s;

    out.log_missed = log_inner(log_upsilon(n_max, 1, log_e, log_clutter, log_q), log_rho) - log_den;

    out.log_detected.resize(log_xi.size());
    std::vector<double> rest;
    rest.reserve(log_xi.size());
    for (std::size_t z = 0; z < log_xi.size(); ++z) {
        rest.clear();
        for (std::size_t k = 0; k < log_xi.size(); ++k)
            if (k != z) rest.push_back(log_xi[k]);
        const auto log_e_rest = log_esf(rest);
        out.log_detected[z] =
            log_inner(log_upsilon(n_max, 1, log_e_rest, log_clutter, log_q), log_rho) - log_den;
    }
    return out;
}

double log_angle_likelihood(const Vec2& z, const Vec2& mean, const Mat2& cov) {
    const Vec2 shifted(mean.x() + astro::wrap_pi(z.x() - mean.x()), z.y());
    return gmm::log_gaussian(shifted, mean, cov);
}

CphdState predict(const CphdState& state, double dt) {
    if (dt == 0.0) return state;
    CphdState out{gmm::GaussianMixture(state.intensity.dim), state.cardinality};
    const auto& comps = state.intensity.components;
    out.intensity.components.resize(comps.size());
    const gmm::VectorMap flow = [dt](const Vec& x) -> Vec {
        return astro::propagate_two_body(astro::StateVector::from(x), dt).stacked();
    };

    std::optional<std::string> failure;
    const auto n = static_cast<long>(comps.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (long i = 0; i < n; ++i) {
        const auto& c = comps[static_cast<std::size_t>(i)];
        try {
            const auto ut = gmm::unscented_transform(c, flow);
            out.intensity.components[static_cast<std::size_t>(i)] = gmm::GaussianComponent{c.weight, ut.mean, ut.cov};
        } catch (const std::exception& e) {
#pragma omp critical(seeker_predict_failure)
            {
                if (!failure) {
                    std::ostringstream msg;
                    msg << "predict: component " << i << ": " << e.what();
                    failure = msg.str();
                }
            }
        }
    }
    if (failure) throw NumericalError(*failure);
    return out;
}

ClutterModel propagate_catalog(const ClutterModel& clutter, double dt) {
    ClutterModel out{{}, clutter.p_d};
    out.catalog.reserve(clutter.catalog.size());
    const gmm::VectorMap flow = [dt](const Vec& x) -> Vec {
        return astro::propagate_two_body(astro::StateVector::from(x), dt).stacked();
    };
    for (const auto& obj : clutter.catalog) {
        const auto ut = gmm::unscented_transform(Vec(obj.mean), Mat(obj.cov), flow);
        out.catalog.push_back(CatalogObject{ut.mean, ut.cov});
    }
    return out;
}

gmm::GaussianMixture clutter_intensity(const ClutterModel& clutter, const astro::StateVector& observer,
                                       const Mat2& noise) {
    gmm::GaussianMixture out(2);
    for (const auto& obj : clutter.catalog) {
        const Vec3 pos = obj.mean.head<3>();
        const auto z = astro::measure_radec(pos, observer.position);
        const Mat26 h = astro::measurement_jacobian(pos, observer.position);
        Mat2 s = h * obj.cov * h.transpose() + noise;
        s = 0.5 * (s + s.transpose());
        out.components.push_back(gmm::GaussianComponent{1.0, z.vec(), s});
    }
    return out;
}

CardinalityPmf clutter_cardinality(std::size_t n_kappa_fov, double p_d) {
    if (!(p_d >= 0.0 && p_d <= 1.0)) throw InvalidInput("clutter_cardinality: p_d outside [0, 1]");
    CardinalityPmf pmf{std::vector<double>(n_kappa_fov + 1, 0.0)};
    const double nk = static_cast<double>(n_kappa_fov);
    for (std::size_t n = 0; n <= n_kappa_fov; ++n) {
        const double dn = static_cast<double>(n);
        if (p_d == 0.0) {
            pmf.probs[n] = n == 0 ? 1.0 : 0.0;
        } else if (p_d == 1.0) {
            pmf.probs[n] = n == n_kappa_fov ? 1.0 : 0.0;
        } else {
            const double log_c = std::lgamma(nk + 1.0) - std::lgamma(dn + 1.0) - std::lgamma(nk - dn + 1.0);
            pmf.probs[n] = std::exp(log_c + dn * std::log(p_d) + (nk - dn) * std::log1p(-p_d));
        }
    }
    return pmf;
}

std::vector<std::size_t> catalog_in_fov(const gmm::GaussianMixture& clutter_2d, const gmm::FovRect& fov) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < clutter_2d.size(); ++i)
        if (fov.contains(clutter_2d.components[i].mean)) idx.push_back(i);
    return idx;
}

CphdState update(const CphdState& state, const MeasurementSet& zset, const DetectionModel& det,
                 const ClutterModel& clutter) {
    const auto& prior = state.intensity;
    if (prior.dim != 6 && !prior.empty()) throw InvalidInput("cphd::update: intensity must be 6D");
    if (!(det.p_d >= 0.0 && det.p_d <= 1.0)) throw InvalidInput("cphd::update: p_d outside [0, 1]");
    const std::size_t m = zset.size();
    const double total = prior.total_weight();
    const double log_w = safe_log(total);
    const double log_pd = safe_log(det.p_d);

    // Clutter restricted to catalog objects predicted inside the FOV.
    const auto kappa = clutter_intensity(clutter, det.observer, zset.noise);
    const auto in_fov_catalog = catalog_in_fov(kappa, det.fov);
    const auto clutter_pmf = clutter_cardinality(in_fov_catalog.size(), clutter.p_d);
    std::vector<double> log_c(m, 0.0);  // log(kappa(z) / <1, kappa>)
    if (!in_fov_catalog.empty()) {
        std::vector<double> terms(in_fov_catalog.size());
        for (std::size_t k = 0; k < m; ++k) {
            for (std::size_t c = 0; c < in_fov_catalog.size(); ++c) {
                const auto& comp = kappa.components[in_fov_catalog[c]];
                terms[c] = log_angle_likelihood(zset.z[k].vec(), comp.mean, Mat2(comp.cov));
            }
            log_c[k] = gmm::log_sum_exp(terms) - std::log(static_cast<double>(in_fov_catalog.size()));
        }
    }

    // Per in-FOV component: predicted measurement, innovation covariance, gain.
    struct Detectable {
        std::size_t index;
        Vec2 zhat;
        Mat2 s;
        Mat jacobian;
        Mat gain;
    };
    std::vector<Detectable> detectable;
    std::vector<char> in_fov(prior.size(), 0);
    double missed_mass = 0.0;
    for (std::size_t i = 0; i < prior.size(); ++i) {
        const auto& c = prior.components[i];
        const auto proj = gmm::project_to_for(c, det.observer);
        if (det.p_d > 0.0 && det.fov.contains(proj.mean)) {
            in_fov[i] = 1;
            missed_mass += (1.0 - det.p_d) * c.weight;
            Mat2 s = proj.cov + zset.noise;
            s = 0.5 * (s + s.transpose());
            const Mat gain = c.cov * proj.jacobian.transpose() * s.inverse();
            detectable.push_back(Detectable{i, proj.mean, s, proj.jacobian, gain});
        } else {
            missed_mass += c.weight;
        }
    }

    // log g(z | component) for every (detectable, z) pair.
    std::vector<double> log_g(detectable.size() * m);
    std::vector<double> log_xi(m);
    std::vector<double> terms(detectable.size());
    for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t d = 0; d < detectable.size(); ++d) {
            const auto& dc = detectable[d];
            log_g[d * m + k] = log_angle_likelihood(zset.z[k].vec(), dc.zhat, dc.s);
            terms[d] = std::log(prior.components[dc.index].weight) + log_g[d * m + k];
        }
        log_xi[k] = gmm::log_sum_exp(terms) + log_pd - log_c[k] - log_w;
    }

    const double q = total > 0.0 ? missed_mass / total : 1.0;
    const auto corr = cphd_correction(state.cardinality.probs, clutter_pmf.probs, log_xi, q);

    CphdState out;
    out.cardinality.probs = corr.posterior;
    out.intensity = gmm::GaussianMixture(prior.dim);
    out.intensity.components.reserve(prior.size() + detectable.size() * m);
    const double missed_scale = std::exp(corr.log_missed - log_w);
    for (std::size_t i = 0; i < prior.size(); ++i) {
        auto c = prior.components[i];
        c.weight *= (in_fov[i] ? (1.0 - det.p_d) : 1.0) * missed_scale;
        out.intensity.components.push_back(std::move(c));
    }
    for (std::size_t d = 0; d < detectable.size(); ++d) {
        const auto& dc = detectable[d];
        const auto& c = prior.components[dc.index];
        // Joseph form.
        const Mat ikh = Mat::Identity(6, 6) - dc.gain * dc.jacobian;
        Mat cov = ikh * c.cov * ikh.transpose() + dc.gain * Mat(zset.noise) * dc.gain.transpose();
        cov = 0.5 * (cov + cov.transpose());
        for (std::size_t k = 0; k < m; ++k) {
            const double lw = std::log(c.weight) + log_pd + log_g[d * m + k] - log_c[k] - log_w + corr.log_detected[k];
            const double w = std::exp(lw);
            if (!(w > 0.0)) continue;
            Vec2 resid = zset.z[k].vec() - dc.zhat;
            resid.x() = astro::wrap_pi(resid.x());
            out.intensity.components.push_back(gmm::GaussianComponent{w, c.mean + dc.gain * resid, cov});
        }
    }
    return out;
}

double expected_cardinality(const CphdState& state) { return state.cardinality.mean(); }
std::size_t map_cardinality(const CphdState& state) { return state.cardinality.map(); }

}  // namespace seeker::cphd
