#include "doctest.h"

#include "seeker/config.hpp"
#include "seeker/io.hpp"

#include "json.hpp"

#include <fstream>
#include <sstream>
#include <string>

using namespace seeker;

namespace {

std::string shipped_text(const std::string& name) {
    std::ifstream in(config::resolve_config_path(name));
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string error_of(const std::string& text) {
    try {
        config::parse_config(text);
    } catch (const InvalidInput& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("shipped case 1") {
    const auto cfg = config::load_config(config::resolve_config_path("case1"));
    const auto& s = cfg.scenario;
    CHECK(s.fov_deg == 6.0);
    CHECK(s.noise_arcsec == 3.0);
    CHECK(s.n_scans == 30);
    CHECK(s.scan_dt_s == 15.0);
    CHECK(s.p_d == 0.75);
    CHECK(s.truth_elements.a == 25447.5);
    CHECK(s.truth_elements.e == 0.66);
    CHECK(s.cutout_hours == 2.0);
    CHECK(s.ar.e_max == 0.7);
    CHECK(s.ar.a_min == 20000.0);
    CHECK(s.ar.a_max == 42000.0);
    CHECK(cfg.mc_trials == 20);
}

TEST_CASE("shipped case 2") {
    const auto cfg = config::load_config(config::resolve_config_path("case2"));
    const auto& s = cfg.scenario;
    CHECK(s.truth_elements.a == 42259.0);
    CHECK(s.truth_elements.e == 0.001);
    CHECK(s.ar.e_min == 0.0);
    CHECK(s.ar.e_max == 0.35);
    CHECK(s.ar.a_min == 10000.0);
    CHECK(s.ar.a_max == 45000.0);
    CHECK(s.n_targets == 10);
    CHECK(s.n_clutter == 15);
    CHECK(s.cardinality_prior.kind == sim::CardinalityPrior::Kind::uniform);
    CHECK(s.cardinality_prior.upper == 19);
}

TEST_CASE("validation names the offending key") {
    auto j = nlohmann::json::parse(shipped_text("case1"));
    j["sensor"].erase("p_d");
    const auto missing = error_of(j.dump());
    CHECK(missing.find("sensor.p_d") != std::string::npos);
    CHECK(missing.find("missing") != std::string::npos);

    j = nlohmann::json::parse(shipped_text("case1"));
    j["filter"]["bogus"] = 1;
    CHECK(error_of(j.dump()).find("filter.bogus: unknown key") != std::string::npos);

    j = nlohmann::json::parse(shipped_text("case1"));
    j["sensor"]["p_d"] = 1.5;
    CHECK(error_of(j.dump()).find("sensor.p_d") != std::string::npos);

    j = nlohmann::json::parse(shipped_text("case1"));
    j["n_scans"] = "thirty";
    CHECK(error_of(j.dump()).find("n_scans") != std::string::npos);

    CHECK(error_of("{not json").find("malformed") != std::string::npos);
    CHECK_THROWS_AS(config::load_config("/nonexistent/x.json"), InvalidInput);
}

TEST_CASE("config path resolution") {
    CHECK(config::resolve_config_path("some/dir/x.json") == "some/dir/x.json");
    CHECK(config::resolve_config_path("case1").find("case1.json") != std::string::npos);
}

}

TEST_SUITE("io") {

TEST_CASE("aggregate table round trip and report") {
    sim::McAggregate agg;
    agg.n_trials = 1;
    sim::PolicyAggregate pa;
    pa.policy = sim::Policy::information;
    pa.divergence = {{1.0, 2.0, 3.0}, {0.5, 1.5, 2.5}};
    pa.cardinality_error = {{0.1, 0.2, 0.3}, {0.0, 0.1, 0.2}};
    agg.policies.push_back(pa);
    std::ostringstream out;
    io::write_aggregate(out, agg);
    std::istringstream in(out.str());
    const auto rows = io::read_aggregate(in);
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].scan == 2);
    CHECK(rows[1].policy == "info");
    CHECK(rows[1].div_median == 1.5);
    CHECK(rows[1].card_q75 == 0.2);

    std::ostringstream rep;
    io::write_report(rep, rows, {2});
    CHECK(rep.str().find("info") != std::string::npos);
}

TEST_CASE("grid and cardinality writers") {
    sim::ForGrid g;
    g.n_rows = 2;
    g.n_cols = 3;
    g.step = 0.1;
    g.actions.resize(6);
    std::ostringstream out;
    io::write_grid(out, g, {1, 2, 3, 4, 5, 6});
    std::istringstream in(out.str());
    std::size_t rows = 0, cols = 0;
    in >> rows >> cols;
    CHECK(rows == 2);
    CHECK(cols == 3);
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++lines;
    CHECK(lines == 3);  // rest of the header line, then one per row

    std::ostringstream card;
    io::write_cardinality(card, cphd::CardinalityPmf::point(2, 3));
    CHECK(card.str().find("n[targets]") == 0);
}

}
