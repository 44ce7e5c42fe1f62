// Serial vs OpenMP timings of the data-parallel kernels.

#include "seeker/admissible_region.hpp"
#include "seeker/config.hpp"
#include "seeker/kernels.hpp"
#include "seeker/reward.hpp"
#include "seeker/sim.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>

using namespace seeker;

namespace {

double best_of(int reps, const std::function<void()>& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

void row(const char* name, double serial, double parallel, bool same) {
    std::printf("%-18s %10.4f %10.4f %8.2fx  %s\n", name, serial, parallel, serial / parallel,
                same ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    kernels::apply_thread_override();
    CLI::App app{"Kernel benchmark"};
    std::size_t n_points = 5000;
    int reps = 3;
    std::string config = "case2";
    app.add_option("--points", n_points, "particles for the kNN kernel");
    app.add_option("--reps", reps, "repetitions (best time is reported)");
    app.add_option("--config", config, "scenario for the AR grid and action sweep");
    CLI11_PARSE(app, argc, argv);

    std::printf("threads: %d\n", kernels::thread_count());
    std::printf("%-18s %10s %10s %9s\n", "kernel", "serial[s]", "omp[s]", "speedup");

    Rng rng(7);
    std::normal_distribution<double> n01;
    std::vector<Vec6> pts(n_points);
    for (auto& p : pts)
        for (int d = 0; d < 6; ++d) p(d) = n01(rng);
    kernels::NeighborTable a, b;
    const double ks = best_of(reps, [&] { a = kernels::knn_serial(pts, 10); });
    const double kp = best_of(reps, [&] { b = kernels::knn_parallel(pts, 10); });
    row("knn", ks, kp, a.neighbors == b.neighbors);

    const auto cfg = config::load_config(config::resolve_config_path(config));
    const auto& s = cfg.scenario;
    Rng arng = make_rng({s.seed, tag(Stream::attributable)});
    const auto att = sim::make_attributable(s, arng);
    const auto spec = ar::ArGridSpec::defaults(s.ar, att.observer, s.ar_n_rho, s.ar_n_rho_rate);
    ar::ArPointSet ps, pp;
    const double as = best_of(reps, [&] { ps = ar::admissible_points_serial(att, s.ar, spec); });
    const double ap = best_of(reps, [&] { pp = ar::admissible_points(att, s.ar, spec); });
    bool same = ps.points.size() == pp.points.size();
    for (std::size_t i = 0; same && i < ps.points.size(); ++i)
        same = ps.points[i].rho == pp.points[i].rho && ps.points[i].rho_rate == pp.points[i].rho_rate;
    row("admissible_grid", as, ap, same);

    const auto init = sim::init_scenario(s, 0);
    auto rc = cfg.reward;
    rc.n_samp = std::min<std::size_t>(rc.n_samp, 2000);
    Rng prng = make_rng({rc.seed, 0, tag(Stream::particles)});
    const auto ctx = reward::prepare_reward_context(init.search.state, init.catalog,
                                                    s.followup_observer(s.scan_epoch(0)), s.noise(), s.p_d, rc, prng);
    reward::Selection ss, sp;
    const double rs = best_of(1, [&] { ss = reward::select_action_serial(init.search.grid.actions, ctx, rc, 0); });
    const double rp = best_of(1, [&] { sp = reward::select_action(init.search.grid.actions, ctx, rc, 0); });
    row("action_sweep", rs, rp, ss.rewards == sp.rewards);
    return 0;
}
