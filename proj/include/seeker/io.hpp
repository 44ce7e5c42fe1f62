#pragma once

// Plain-text writers. Tables are tab-separated with a unit-bearing header;
// grids are dense row-major with a one-line extent header.

#include "seeker/admissible_region.hpp"
#include "seeker/sim.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace seeker::io {

void write_scan_log(std::ostream& out, const sim::RunResult& run);
/// Header "n_rows n_cols ra_min ra_max dec_min dec_max" (radians), then one line per row.
void write_grid(std::ostream& out, const sim::ForGrid& grid, const std::vector<double>& values);
void write_cardinality(std::ostream& out, const cphd::CardinalityPmf& pmf);
void write_aggregate(std::ostream& out, const sim::McAggregate& agg);
void write_final_scans(std::ostream& out, const sim::McAggregate& agg);
void write_ar_points(std::ostream& out, const ar::ArPointSet& points);
void write_gmm(std::ostream& out, const gmm::GaussianMixture& mix);

struct AggregateRow {
    std::size_t scan = 0;
    std::string policy;
    double div_q25 = 0.0, div_median = 0.0, div_q75 = 0.0;
    double card_q25 = 0.0, card_median = 0.0, card_q75 = 0.0;
};

std::vector<AggregateRow> read_aggregate(std::istream& in);
/// Fixed-width quantile table at the given scans (1-based).
void write_report(std::ostream& out, const std::vector<AggregateRow>& rows, const std::vector<std::size_t>& scans);

void write_file(const std::string& path, const std::string& contents);

}  // namespace seeker::io
