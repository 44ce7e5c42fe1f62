#include "seeker/sim.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <sstream>

namespace seeker::sim {

namespace {

constexpr double kGate99 = 9.21034037197618;  // chi-square, 2 dof, 0.99

std::vector<Vec6> propagate_all(const std::vector<Vec6>& xs, double dt) {
    std::vector<Vec6> out;
    out.reserve(xs.size());
    for (const auto& x : xs) out.push_back(astro::propagate_two_body(astro::StateVector::from(x), dt).stacked());
    return out;
}

// Weighted quantile of values by weight (values sorted internally).
double weighted_quantile(std::vector<std::pair<double, double>> vw, double q) {
    std::sort(vw.begin(), vw.end());
    double total = 0.0;
    for (const auto& p : vw) total += p.second;
    double acc = 0.0;
    for (const auto& p : vw) {
        acc += p.second;
        if (acc >= q * total) return p.first;
    }
    return vw.back().first;
}

std::uint64_t reward_seed(std::uint64_t base, std::uint64_t trial) {
    Rng r = make_rng({base, trial, tag(Stream::reward)});
    return r();
}

}  // namespace

cphd::CardinalityPmf CardinalityPrior::pmf() const {
    switch (kind) {
        case Kind::poisson: return cphd::CardinalityPmf::poisson(mean, n_max);
        case Kind::uniform: return cphd::CardinalityPmf::uniform(upper, n_max);
    }
    throw InvalidInput("CardinalityPrior: unknown kind");
}

Mat2 Scenario::noise() const {
    const double s = sigma_rad();
    return Mat2::Identity() * s * s;
}

void Scenario::validate() const {
    auto fail = [](const std::string& what) { throw InvalidInput("scenario: " + what); };
    if (n_scans == 0) fail("n_scans must be positive");
    if (!(scan_dt_s > 0.0)) fail("scan_dt_s must be positive");
    if (!(p_d > 0.0 && p_d <= 1.0)) fail("p_d must lie in (0, 1]");
    if (!(fov_deg > 0.0 && fov_deg < 180.0)) fail("fov_deg must lie in (0, 180)");
    if (!(noise_arcsec > 0.0)) fail("noise_arcsec must be positive");
    if (!(cutout_hours >= 0.0)) fail("cutout_hours must be nonnegative");
    if (!(track_arc_s > 0.0)) fail("track_arc_s must be positive");
    if (!(ar.a_min > 0.0 && ar.a_max > ar.a_min)) fail("ar semimajor-axis bounds must satisfy 0 < a_min < a_max");
    if (!(ar.e_min >= 0.0 && ar.e_max > ar.e_min && ar.e_max < 1.0)) fail("ar eccentricity bounds must satisfy 0 <= e_min < e_max < 1");
    if (ar_n_rho < 2 || ar_n_rho_rate < 2) fail("ar grid needs at least 2 points per axis");
    if (n_targets == 0) fail("n_targets must be positive");
    if (n_targets > cardinality_prior.n_max) fail("n_targets exceeds the cardinality support");
    if (!(catalog_sigma_pos_km > 0.0 && catalog_sigma_vel_kms > 0.0)) fail("catalog sigmas must be positive");
    if (!(grid_tail_mass >= 0.0 && grid_tail_mass < 0.5)) fail("grid_tail_mass must lie in [0, 0.5)");
}

ForGrid make_for_grid(const gmm::GaussianMixture& intensity, const astro::StateVector& observer, double fov_rad,
                      double tail_mass) {
    if (intensity.empty()) throw InvalidInput("make_for_grid: empty intensity");
    std::vector<Vec2> proj;
    std::vector<double> w;
    proj.reserve(intensity.size());
    Vec2 circ = Vec2::Zero();
    for (const auto& c : intensity.components) {
        const auto z = astro::measure_radec(Vec3(c.mean.head<3>()), observer.position);
        proj.push_back(z.vec());
        w.push_back(c.weight);
        circ += c.weight * Vec2(std::cos(z.ra), std::sin(z.ra));
    }
    const double ra_center = std::atan2(circ.y(), circ.x());
    std::vector<std::pair<double, double>> ras, decs;
    for (std::size_t i = 0; i < proj.size(); ++i) {
        ras.emplace_back(ra_center + astro::wrap_pi(proj[i].x() - ra_center), w[i]);
        decs.emplace_back(proj[i].y(), w[i]);
    }
    const double ra_lo = weighted_quantile(ras, tail_mass);
    const double ra_hi = weighted_quantile(ras, 1.0 - tail_mass);
    const double dec_lo = weighted_quantile(decs, tail_mass);
    const double dec_hi = weighted_quantile(decs, 1.0 - tail_mass);

    ForGrid g;
    g.step = 0.5 * fov_rad;
    g.n_cols = static_cast<std::size_t>(std::ceil((ra_hi - ra_lo) / g.step)) + 1;
    g.n_rows = static_cast<std::size_t>(std::ceil((dec_hi - dec_lo) / g.step)) + 1;
    // Center the grid on the box.
    g.ra_min = 0.5 * (ra_lo + ra_hi) - 0.5 * g.step * static_cast<double>(g.n_cols - 1);
    g.dec_min = 0.5 * (dec_lo + dec_hi) - 0.5 * g.step * static_cast<double>(g.n_rows - 1);
    g.actions.reserve(g.n_rows * g.n_cols);
    for (std::size_t r = 0; r < g.n_rows; ++r) {
        for (std::size_t c = 0; c < g.n_cols; ++c) {
            const Vec2 p(astro::wrap_two_pi(g.ra_min + g.step * static_cast<double>(c)),
                         g.dec_min + g.step * static_cast<double>(r));
            g.actions.push_back(reward::Action{p, gmm::FovRect(p, 0.5 * fov_rad, 0.5 * fov_rad)});
        }
    }
    return g;
}

std::vector<double> cell_intensity(const gmm::GaussianMixture& intensity, const astro::StateVector& observer,
                                   const ForGrid& grid) {
    std::vector<double> mass(grid.size(), 0.0);
    const double ra_mid = grid.ra_min + 0.5 * (grid.ra_max() - grid.ra_min);
    for (const auto& c : intensity.components) {
        const auto z = astro::measure_radec(Vec3(c.mean.head<3>()), observer.position);
        const double ra = ra_mid + astro::wrap_pi(z.ra - ra_mid);
        const double fc = std::round((ra - grid.ra_min) / grid.step);
        const double fr = std::round((z.dec - grid.dec_min) / grid.step);
        if (fc < 0.0 || fr < 0.0) continue;
        const auto col = static_cast<std::size_t>(fc);
        const auto row = static_cast<std::size_t>(fr);
        if (col >= grid.n_cols || row >= grid.n_rows) continue;
        mass[row * grid.n_cols + col] += c.weight;
    }
    return mass;
}

ar::AttributableVector make_attributable(const Scenario& s, Rng& rng) {
    const auto x0 = astro::kepler_to_cartesian(s.truth_elements);
    const double half = 0.5 * s.track_arc_s;
    const astro::Epoch t1 = s.detection_epoch() + (-half);
    const astro::Epoch t2 = s.detection_epoch() + half;
    const auto x1 = astro::propagate_two_body(x0, t1.t);
    const auto x2 = astro::propagate_two_body(x0, t2.t);
    const auto z1 = astro::measure_radec(x1, s.initial_observer(t1));
    const auto z2 = astro::measure_radec(x2, s.initial_observer(t2));

    std::normal_distribution<double> n01;
    const double sig = s.sigma_rad();
    const double ra1 = z1.ra + sig * n01(rng), dec1 = z1.dec + sig * n01(rng);
    const double ra2 = z2.ra + sig * n01(rng), dec2 = z2.dec + sig * n01(rng);
    const double dra = astro::wrap_pi(ra2 - ra1);

    ar::AttributableVector att;
    att.ra = astro::wrap_two_pi(ra1 + 0.5 * dra);
    att.dec = 0.5 * (dec1 + dec2);
    att.ra_rate = dra / s.track_arc_s;
    att.dec_rate = (dec2 - dec1) / s.track_arc_s;
    att.epoch = s.detection_epoch();
    att.observer = s.initial_observer(att.epoch);
    const double sig_rate = 2.0 * sig / s.track_arc_s;
    att.noise = Eigen::Vector4d(0.5 * sig * sig, 0.5 * sig * sig, sig_rate * sig_rate, sig_rate * sig_rate).asDiagonal();
    return att;
}

gmm::GaussianMixture search_set(const Scenario& s, const ar::AttributableVector& att) {
    const auto grid = ar::ArGridSpec::defaults(s.ar, att.observer, s.ar_n_rho, s.ar_n_rho_rate);
    return ar::build_ar_gmm(att, s.ar, grid, s.cardinality_prior.pmf().mean());
}

std::vector<Vec6> sample_admissible(const gmm::GaussianMixture& mix, const ar::ArConstraints& c, std::size_t n,
                                    Rng& rng) {
    constexpr int kMaxRounds = 1000;
    std::vector<Vec6> out;
    out.reserve(n);
    for (int round = 0; out.size() < n; ++round) {
        if (round == kMaxRounds) throw NumericalError("sample_admissible: constraint rejection did not converge");
        const auto batch = reward::sample_particles(mix, std::max<std::size_t>(4 * n, 16), rng);
        for (const auto& x : batch.states) {
            if (out.size() == n) break;
            if (ar::admissible_state(astro::StateVector::from(x), c)) out.push_back(x);
        }
    }
    return out;
}

SearchSet build_search_set(const Scenario& s) {
    s.validate();
    SearchSet out;
    Rng rng = make_rng({s.seed, tag(Stream::attributable)});
    out.attributable = make_attributable(s, rng);
    out.ar_mixture = search_set(s, out.attributable);
    cphd::CphdState prior{out.ar_mixture, s.cardinality_prior.pmf()};
    out.state = cphd::predict(prior, s.cutout_hours * 3600.0);
    const auto observer = s.followup_observer(s.followup_start());
    out.grid = make_for_grid(out.state.intensity, observer, s.fov_rad(), s.grid_tail_mass);
    out.cell_mass = cell_intensity(out.state.intensity, observer, out.grid);
    return out;
}

InitialConditions draw_truth(const Scenario& s, const SearchSet& search, std::uint64_t trial) {
    InitialConditions init;
    init.search = search;
    Rng rng = make_rng({s.seed, trial, tag(Stream::truth)});
    init.targets_at_detection = sample_admissible(search.ar_mixture, s.ar, s.n_targets, rng);
    init.clutter_at_detection = sample_admissible(search.ar_mixture, s.ar, s.n_clutter, rng);
    const double dt = s.cutout_hours * 3600.0;
    init.truth.targets = propagate_all(init.targets_at_detection, dt);
    init.truth.clutter = propagate_all(init.clutter_at_detection, dt);
    init.truth.epoch = s.followup_start();

    init.catalog.p_d = s.p_d;
    Vec6 sig;
    sig << Vec3::Constant(s.catalog_sigma_pos_km), Vec3::Constant(s.catalog_sigma_vel_kms);
    const Mat6 cov = sig.cwiseAbs2().asDiagonal();
    for (const auto& x : init.truth.clutter) init.catalog.catalog.push_back(cphd::CatalogObject{x, cov});
    return init;
}

InitialConditions init_scenario(const Scenario& s, std::uint64_t trial) {
    return draw_truth(s, build_search_set(s), trial);
}

cphd::MeasurementSet truth_measurements(const TruthModel& truth, const reward::Action& action, double p_d,
                                        const Mat2& noise, astro::Epoch epoch, const astro::StateVector& observer,
                                        Rng& rng, std::size_t* target_hits) {
    cphd::MeasurementSet z;
    z.epoch = epoch;
    z.noise = noise;
    const Eigen::LLT<Mat2> llt(noise);
    if (llt.info() != Eigen::Success) throw InvalidInput("truth_measurements: noise not SPD");
    const Mat2 chol = llt.matrixL();
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> n01;
    std::size_t hits = 0;
    // Every object consumes the same draws whether or not it is in view, so
    // the stream does not depend on the action.
    auto visit = [&](const Vec6& x, bool is_target) {
        const double u = u01(rng);
        const double a = n01(rng);
        const double b = n01(rng);
        const auto h = astro::measure_radec(Vec3(x.head<3>()), observer.position);
        if (!action.fov.contains(h.vec()) || !(u < p_d)) return;
        const Vec2 v = h.vec() + chol * Vec2(a, b);
        z.z.push_back({astro::wrap_two_pi(v.x()), v.y()});
        if (is_target) ++hits;
    };
    for (const auto& x : truth.targets) visit(x, true);
    for (const auto& x : truth.clutter) visit(x, false);
    if (target_hits) *target_hits = hits;
    return z;
}

ScanningSchedule scanning_policy(const std::vector<double>& cell_mass) {
    if (cell_mass.empty()) throw InvalidInput("scanning_policy: empty grid");
    ScanningSchedule s;
    s.order.resize(cell_mass.size());
    std::iota(s.order.begin(), s.order.end(), std::size_t{0});
    std::stable_sort(s.order.begin(), s.order.end(),
                     [&](std::size_t a, std::size_t b) { return cell_mass[a] > cell_mass[b]; });
    return s;
}

double divergence_metric(const cphd::CphdState& state, const std::vector<Vec6>& truth) {
    const std::size_t n_star = truth.size();
    if (n_star == 0) throw InvalidInput("divergence_metric: no truth targets");
    const double rho = n_star < state.cardinality.probs.size() ? state.cardinality.probs[n_star] : 0.0;
    if (!(rho > 0.0)) return std::numeric_limits<double>::infinity();
    const double total = state.intensity.total_weight();
    if (!(total > 0.0)) return std::numeric_limits<double>::infinity();

    std::vector<double> terms;
    terms.reserve(n_star * state.intensity.size());
    for (const auto& c : state.intensity.components) {
        if (!(c.weight > 0.0)) continue;
        const double lw = std::log(c.weight / total);
        Eigen::LLT<Mat> llt(c.cov);
        if (llt.info() != Eigen::Success) throw NumericalError("divergence_metric: covariance not SPD");
        const Mat l = llt.matrixL();
        const double logdet = 2.0 * l.diagonal().array().log().sum();
        for (const auto& x : truth) {
            const Vec y = llt.matrixL().solve(Vec(x - c.mean));
            terms.push_back(lw - 0.5 * (y.squaredNorm() + logdet + 6.0 * std::log(kTwoPi)));
        }
    }
    const double log_like = gmm::log_sum_exp(terms);
    const double n = static_cast<double>(n_star);
    return n * std::log(n) - 2.0 * n * log_like - std::log(rho);
}

double cardinality_error(const cphd::CardinalityPmf& pmf, std::size_t n_star) {
    double e = 0.0;
    for (std::size_t n = 0; n < pmf.probs.size(); ++n)
        e += pmf.probs[n] * std::abs(static_cast<double>(n) - static_cast<double>(n_star));
    return e;
}

std::size_t false_tracks(const cphd::CphdState& state, const std::vector<Vec6>& truth,
                         const astro::StateVector& observer, const Mat2& noise) {
    std::vector<Vec2> zt;
    for (const auto& x : truth) zt.push_back(astro::measure_radec(Vec3(x.head<3>()), observer.position).vec());
    std::size_t count = 0;
    for (const auto& c : state.intensity.components) {
        if (!(c.weight > 0.5)) continue;
        const auto proj = gmm::project_to_for(c, observer);
        const Mat2 s_inv = (proj.cov + noise).inverse();
        bool gated = false;
        for (const auto& z : zt) {
            Vec2 d = z - proj.mean;
            d.x() = astro::wrap_pi(d.x());
            if (d.dot(s_inv * d) <= kGate99) {
                gated = true;
                break;
            }
        }
        if (!gated) ++count;
    }
    return count;
}

const char* policy_name(Policy p) { return p == Policy::information ? "info" : "scan"; }

RunResult run_closed_loop(const Scenario& s, const InitialConditions& init, Policy policy,
                          const reward::RewardConfig& rcfg, std::uint64_t trial, const ScanCallback& on_scan) {
    using Clock = std::chrono::steady_clock;
    RunResult result;
    result.policy = policy;
    cphd::CphdState state = init.search.state;
    cphd::ClutterModel catalog = init.catalog;
    TruthModel truth = init.truth;
    const auto& grid = init.search.grid;
    const Mat2 noise = s.noise();
    const auto schedule = scanning_policy(init.search.cell_mass);
    reward::RewardConfig rc = rcfg;
    rc.seed = reward_seed(rcfg.seed, trial);

    for (std::size_t k = 0; k < s.n_scans; ++k) {
        const auto t0 = Clock::now();
        const astro::Epoch epoch = s.scan_epoch(k);
        const auto observer = s.followup_observer(epoch);
        try {
            if (k > 0) {
                state = cphd::predict(state, s.scan_dt_s);
                catalog = cphd::propagate_catalog(catalog, s.scan_dt_s);
                truth.targets = propagate_all(truth.targets, s.scan_dt_s);
                truth.clutter = propagate_all(truth.clutter, s.scan_dt_s);
                truth.epoch = epoch;
            }

            std::vector<double> rewards;
            std::size_t action = 0;
            if (policy == Policy::information) {
                Rng prng = make_rng({rc.seed, k, tag(Stream::particles)});
                const auto ctx = reward::prepare_reward_context(state, catalog, observer, noise, s.p_d, rc, prng);
                auto sel = reward::select_action(grid.actions, ctx, rc, k);
                action = sel.index;
                rewards = std::move(sel.rewards);
            } else {
                action = schedule.action(k);
            }
            const auto& act = grid.actions[action];

            Rng mrng = make_rng({s.seed, trial, k, tag(Stream::measurements)});
            std::size_t hits = 0;
            const auto z = truth_measurements(truth, act, s.p_d, noise, epoch, observer, mrng, &hits);

            state.intensity = gmm::recursive_fov_split(state.intensity, act.fov, observer, s.filter.split);
            const cphd::DetectionModel det{s.p_d, act.fov, observer};
            state = cphd::update(state, z, det, catalog);
            state.intensity = gmm::prune_and_merge(state.intensity, s.filter.prune);

            ScanRecord rec;
            rec.scan = k;
            rec.epoch_s = epoch.t;
            rec.action = action;
            rec.pointing = act.pointing;
            rec.n_measurements = z.size();
            rec.n_target_hits = hits;
            rec.divergence = divergence_metric(state, truth.targets);
            rec.expected_cardinality = state.cardinality.mean();
            rec.map_cardinality = state.cardinality.map();
            rec.cardinality_error = cardinality_error(state.cardinality, truth.targets.size());
            rec.n_components = state.intensity.size();
            rec.n_false_tracks = false_tracks(state, truth.targets, observer, noise);
            rec.wall_s = std::chrono::duration<double>(Clock::now() - t0).count();
            result.scans.push_back(rec);
            if (on_scan)
                on_scan(ScanSnapshot{result.scans.back(), policy == Policy::information ? &rewards : nullptr, state,
                                     grid, observer});
        } catch (const Error& e) {
            std::ostringstream msg;
            msg << "scan " << k << " (" << policy_name(policy) << ", trial " << trial << "): " << e.what();
            throw NumericalError(msg.str());
        }
    }
    result.final_state = std::move(state);
    return result;
}

Quantiles quantiles(std::vector<double> values) {
    if (values.empty()) throw InvalidInput("quantiles: no values");
    std::sort(values.begin(), values.end());
    auto at = [&](double q) {
        const double pos = q * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, values.size() - 1);
        const double f = pos - static_cast<double>(lo);
        if (f == 0.0) return values[lo];
        return values[lo] + f * (values[hi] - values[lo]);
    };
    return Quantiles{at(0.25), at(0.5), at(0.75)};
}

McAggregate aggregate(const std::vector<Policy>& policies, std::vector<std::vector<RunResult>> runs) {
    McAggregate agg;
    agg.n_trials = runs.empty() ? 0 : runs.front().size();
    for (std::size_t p = 0; p < policies.size(); ++p) {
        PolicyAggregate pa;
        pa.policy = policies[p];
        const std::size_t n_scans = runs[p].front().scans.size();
        for (std::size_t k = 0; k < n_scans; ++k) {
            std::vector<double> d, c;
            for (const auto& r : runs[p]) {
                d.push_back(r.scans[k].divergence);
                c.push_back(r.scans[k].cardinality_error);
            }
            pa.divergence.push_back(quantiles(d));
            pa.cardinality_error.push_back(quantiles(c));
        }
        agg.policies.push_back(std::move(pa));
    }
    agg.runs = std::move(runs);
    return agg;
}

McAggregate monte_carlo(const Scenario& s, const std::vector<Policy>& policies, std::size_t n_trials,
                        const reward::RewardConfig& rcfg) {
    if (n_trials == 0) throw InvalidInput("monte_carlo: n_trials must be positive");
    if (policies.empty()) throw InvalidInput("monte_carlo: no policies");
    const auto search = build_search_set(s);
    std::vector<std::vector<RunResult>> runs(policies.size(), std::vector<RunResult>(n_trials));
    std::exception_ptr failure;
    const auto nt = static_cast<long>(n_trials);
#pragma omp parallel for schedule(dynamic, 1)
    for (long t = 0; t < nt; ++t) {
        try {
            const auto trial = static_cast<std::uint64_t>(t);
            const auto init = draw_truth(s, search, trial);
            for (std::size_t p = 0; p < policies.size(); ++p)
                runs[p][static_cast<std::size_t>(t)] = run_closed_loop(s, init, policies[p], rcfg, trial);
        } catch (...) {
#pragma omp critical(seeker_mc_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return aggregate(policies, std::move(runs));
}

}  // namespace seeker::sim
