#include "doctest.h"

#include "seeker/config.hpp"
#include "seeker/random.hpp"
#include "seeker/sim.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace seeker;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SEEKER_CLI) + " " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("seeker_cli_test_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("ar writes only admissible points") {
    const auto dir = scratch("ar");
    REQUIRE(run_cli("ar --config case2 --out " + dir.string()) == 0);
    const auto s = config::load_config(config::resolve_config_path("case2")).scenario;
    Rng rng = make_rng({s.seed, tag(Stream::attributable)});
    const auto att = sim::make_attributable(s, rng);

    std::istringstream in(slurp(dir / "ar_points.tsv"));
    std::string header;
    std::getline(in, header);
    CHECK(header == "rho[km]\trho_rate[km/s]");
    std::size_t rows = 0;
    double rho = 0.0, rate = 0.0;
    while (in >> rho >> rate) {
        ++rows;
        CHECK(ar::admissible(att, rho, rate, s.ar));
    }
    CHECK(rows > 0);
    fs::remove_all(dir);
}

TEST_CASE("mc is byte-identical across repeated runs") {
    const auto a = scratch("mc_a"), b = scratch("mc_b");
    const std::string args = "mc --config clean --trials 1 --scans 3 --n-samp 400 --out ";
    REQUIRE(run_cli(args + a.string()) == 0);
    REQUIRE(run_cli(args + b.string()) == 0);
    const auto ta = slurp(a / "aggregate.tsv");
    CHECK_FALSE(ta.empty());
    CHECK(ta == slurp(b / "aggregate.tsv"));
    CHECK(run_cli("report --out " + a.string()) == 0);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("bad arguments fail cleanly") {
    CHECK(run_cli("run --policy greedy") != 0);
    CHECK(run_cli("mc --config /nonexistent/x.json") != 0);
    CHECK(run_cli("") != 0);
}

}
