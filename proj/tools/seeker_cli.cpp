// Command-line front end: search-set generation, single closed-loop runs,
// Monte-Carlo policy comparisons and quantile reports.

#include "seeker/config.hpp"
#include "seeker/io.hpp"
#include "seeker/kernels.hpp"
#include "seeker/sim.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace seeker;

namespace {

struct Options {
    std::string config = "case1";
    std::string policy = "info";
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> trials;
    std::optional<std::size_t> scans;
    std::optional<std::size_t> n_samp;
    std::string out = "out";
    std::string aggregate;
};

config::Config load(const Options& o) {
    auto cfg = config::load_config(config::resolve_config_path(o.config));
    if (o.seed) {
        cfg.scenario.seed = *o.seed;
        cfg.reward.seed = *o.seed;
    }
    if (o.trials) {
        if (*o.trials == 0) throw InvalidInput("--trials must be positive");
        cfg.mc_trials = *o.trials;
    }
    if (o.scans) {
        if (*o.scans == 0) throw InvalidInput("--scans must be positive");
        cfg.scenario.n_scans = *o.scans;
    }
    if (o.n_samp) {
        if (*o.n_samp <= cfg.reward.ell) throw InvalidInput("--n-samp must exceed ell");
        cfg.reward.n_samp = *o.n_samp;
    }
    return cfg;
}

sim::Policy parse_policy(const std::string& p) {
    if (p == "info") return sim::Policy::information;
    if (p == "scan") return sim::Policy::scanning;
    throw InvalidInput("--policy must be info or scan");
}

std::string to_text(const std::function<void(std::ostream&)>& f) {
    std::ostringstream s;
    f(s);
    return s.str();
}

fs::path prepare_out(const std::string& dir) {
    fs::path p(dir);
    fs::create_directories(p);
    return p;
}

std::string scan_name(const char* stem, std::size_t k) {
    std::ostringstream s;
    s << stem << '_' << std::setw(3) << std::setfill('0') << k << ".txt";
    return s.str();
}

int cmd_ar(const Options& o) {
    const auto cfg = load(o);
    const auto& s = cfg.scenario;
    Rng rng = make_rng({s.seed, tag(Stream::attributable)});
    const auto att = sim::make_attributable(s, rng);
    const auto grid = ar::ArGridSpec::defaults(s.ar, att.observer, s.ar_n_rho, s.ar_n_rho_rate);
    const auto points = ar::admissible_points(att, s.ar, grid);
    const auto mix = ar::ar_gmm_from_points(att, points, s.cardinality_prior.pmf().mean());
    const auto dir = prepare_out(o.out);
    io::write_file((dir / "ar_points.tsv").string(), to_text([&](std::ostream& f) { io::write_ar_points(f, points); }));
    io::write_file((dir / "ar_gmm.tsv").string(), to_text([&](std::ostream& f) { io::write_gmm(f, mix); }));
    std::cout << s.name << ": " << points.points.size() << " admissible points, " << mix.size()
              << " components -> " << dir.string() << '\n';
    return 0;
}

int cmd_run(const Options& o) {
    const auto cfg = load(o);
    const auto& s = cfg.scenario;
    const auto policy = parse_policy(o.policy);
    const auto dir = prepare_out(o.out);
    const auto init = sim::init_scenario(s, 0);
    std::cout << s.name << ": action grid " << init.search.grid.n_rows << " x " << init.search.grid.n_cols << " = "
              << init.search.grid.size() << ", " << init.search.state.intensity.size() << " components\n";
    io::write_file((dir / "intensity_000.txt").string(), to_text([&](std::ostream& f) {
                       io::write_grid(f, init.search.grid, init.search.cell_mass);
                   }));

    const auto on_scan = [&](const sim::ScanSnapshot& snap) {
        const std::size_t k = snap.record.scan + 1;
        std::vector<double> rewards(snap.grid.size(), 0.0);
        if (snap.rewards) rewards = *snap.rewards;
        io::write_file((dir / scan_name("reward", k)).string(),
                       to_text([&](std::ostream& f) { io::write_grid(f, snap.grid, rewards); }));
        const auto mass = sim::cell_intensity(snap.posterior.intensity, snap.observer, snap.grid);
        io::write_file((dir / scan_name("intensity", k)).string(),
                       to_text([&](std::ostream& f) { io::write_grid(f, snap.grid, mass); }));
        io::write_file((dir / scan_name("cardinality", k)).string(),
                       to_text([&](std::ostream& f) { io::write_cardinality(f, snap.posterior.cardinality); }));
        std::cerr << "scan " << k << "/" << s.n_scans << "  action " << snap.record.action << "  |Z| "
                  << snap.record.n_measurements << "  E[N] " << snap.record.expected_cardinality << "  D "
                  << snap.record.divergence << "  (" << snap.record.wall_s << " s)\n";
    };
    const auto run = sim::run_closed_loop(s, init, policy, cfg.reward, 0, on_scan);
    io::write_file((dir / "scans.tsv").string(), to_text([&](std::ostream& f) { io::write_scan_log(f, run); }));
    return 0;
}

int cmd_mc(const Options& o) {
    const auto cfg = load(o);
    const auto dir = prepare_out(o.out);
    const std::vector<sim::Policy> policies{sim::Policy::information, sim::Policy::scanning};
    const auto agg = sim::monte_carlo(cfg.scenario, policies, cfg.mc_trials, cfg.reward);
    io::write_file((dir / "aggregate.tsv").string(), to_text([&](std::ostream& f) { io::write_aggregate(f, agg); }));
    io::write_file((dir / "final.tsv").string(), to_text([&](std::ostream& f) { io::write_final_scans(f, agg); }));
    for (std::size_t p = 0; p < policies.size(); ++p) {
        for (std::size_t t = 0; t < agg.runs[p].size(); ++t) {
            std::ostringstream name;
            name << "scans_" << sim::policy_name(policies[p]) << '_' << std::setw(3) << std::setfill('0') << t
                 << ".tsv";
            io::write_file((dir / name.str()).string(),
                           to_text([&](std::ostream& f) { io::write_scan_log(f, agg.runs[p][t]); }));
        }
    }
    std::cout << cfg.scenario.name << ": " << cfg.mc_trials << " trials -> " << dir.string() << '\n';
    return 0;
}

int cmd_report(const Options& o) {
    const std::string path = o.aggregate.empty() ? (fs::path(o.out) / "aggregate.tsv").string() : o.aggregate;
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open " + path);
    const auto rows = io::read_aggregate(in);
    std::size_t last = 0;
    for (const auto& r : rows) last = std::max(last, r.scan);
    std::vector<std::size_t> scans;
    for (std::size_t k : {std::size_t{1}, std::size_t{5}, std::size_t{10}, std::size_t{15}, std::size_t{20},
                          std::size_t{30}, std::size_t{40}, std::size_t{60}, std::size_t{80}})
        if (k < last) scans.push_back(k);
    scans.push_back(last);
    io::write_report(std::cout, rows, scans);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    kernels::apply_thread_override();
    CLI::App app{"Search-and-acquire sensor tasking simulator"};
    app.require_subcommand(1);
    Options o;

    auto common = [&o](CLI::App* c) {
        c->add_option("--config", o.config, "scenario file or shipped name (case1, case2, ...)");
        c->add_option("--seed", o.seed, "master seed override");
        c->add_option("--scans", o.scans, "number of follow-up scans");
        c->add_option("--out", o.out, "output directory");
    };
    auto* ar_cmd = app.add_subcommand("ar", "admissible-region point set and mixture");
    common(ar_cmd);
    auto* run_cmd = app.add_subcommand("run", "single closed-loop trial with per-scan outputs");
    common(run_cmd);
    run_cmd->add_option("--policy", o.policy, "info or scan")->check(CLI::IsMember({"info", "scan"}));
    run_cmd->add_option("--n-samp", o.n_samp, "reward particles per scan");
    auto* mc_cmd = app.add_subcommand("mc", "Monte-Carlo comparison of both policies");
    common(mc_cmd);
    mc_cmd->add_option("--trials", o.trials, "Monte-Carlo trials");
    mc_cmd->add_option("--n-samp", o.n_samp, "reward particles per scan");
    auto* report_cmd = app.add_subcommand("report", "quantile table from an mc aggregate");
    report_cmd->add_option("--out", o.out, "directory holding aggregate.tsv");
    report_cmd->add_option("--aggregate", o.aggregate, "explicit aggregate file");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*ar_cmd) return cmd_ar(o);
        if (*run_cmd) return cmd_run(o);
        if (*mc_cmd) return cmd_mc(o);
        if (*report_cmd) return cmd_report(o);
    } catch (const std::exception& e) {
        std::cerr << "seeker: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
