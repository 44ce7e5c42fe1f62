#include "seeker/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace seeker::io {

namespace {

std::ostream& num(std::ostream& out) { return out << std::setprecision(12); }

}  // namespace

void write_scan_log(std::ostream& out, const sim::RunResult& run) {
    num(out) << "scan\tepoch[s]\taction[index]\tra[rad]\tdec[rad]\tmeasurements[count]\ttarget_hits[count]"
                "\tdivergence[nat]\texpected_cardinality[targets]\tmap_cardinality[targets]"
                "\tcardinality_error[targets]\tcomponents[count]\tfalse_tracks[count]\n";
    for (const auto& r : run.scans) {
        out << r.scan + 1 << '\t' << r.epoch_s << '\t' << r.action << '\t' << r.pointing.x() << '\t'
            << r.pointing.y() << '\t' << r.n_measurements << '\t' << r.n_target_hits << '\t' << r.divergence << '\t'
            << r.expected_cardinality << '\t' << r.map_cardinality << '\t' << r.cardinality_error << '\t'
            << r.n_components << '\t' << r.n_false_tracks << '\n';
    }
}

void write_grid(std::ostream& out, const sim::ForGrid& grid, const std::vector<double>& values) {
    if (values.size() != grid.size()) throw InvalidInput("write_grid: value count does not match grid");
    num(out) << grid.n_rows << ' ' << grid.n_cols << ' ' << grid.ra_min << ' ' << grid.ra_max() << ' '
             << grid.dec_min << ' ' << grid.dec_max() << '\n';
    for (std::size_t r = 0; r < grid.n_rows; ++r) {
        for (std::size_t c = 0; c < grid.n_cols; ++c) {
            if (c) out << ' ';
            out << values[r * grid.n_cols + c];
        }
        out << '\n';
    }
}

void write_cardinality(std::ostream& out, const cphd::CardinalityPmf& pmf) {
    num(out) << "n[targets]\tprobability\n";
    for (std::size_t n = 0; n < pmf.probs.size(); ++n) out << n << '\t' << pmf.probs[n] << '\n';
}

void write_aggregate(std::ostream& out, const sim::McAggregate& agg) {
    num(out) << "scan\tpolicy\tdivergence_q25[nat]\tdivergence_median[nat]\tdivergence_q75[nat]"
                "\tcardinality_error_q25[targets]\tcardinality_error_median[targets]"
                "\tcardinality_error_q75[targets]\n";
    for (const auto& pa : agg.policies) {
        for (std::size_t k = 0; k < pa.divergence.size(); ++k) {
            const auto& d = pa.divergence[k];
            const auto& c = pa.cardinality_error[k];
            out << k + 1 << '\t' << sim::policy_name(pa.policy) << '\t' << d.q25 << '\t' << d.median << '\t'
                << d.q75 << '\t' << c.q25 << '\t' << c.median << '\t' << c.q75 << '\n';
        }
    }
}

void write_final_scans(std::ostream& out, const sim::McAggregate& agg) {
    num(out) << "trial\tpolicy\tdivergence[nat]\tcardinality_error[targets]\texpected_cardinality[targets]"
                "\tfalse_tracks[count]\n";
    for (std::size_t p = 0; p < agg.policies.size(); ++p) {
        for (std::size_t t = 0; t < agg.runs[p].size(); ++t) {
            const auto& last = agg.runs[p][t].scans.back();
            out << t << '\t' << sim::policy_name(agg.policies[p].policy) << '\t' << last.divergence << '\t'
                << last.cardinality_error << '\t' << last.expected_cardinality << '\t' << last.n_false_tracks << '\n';
        }
    }
}

void write_ar_points(std::ostream& out, const ar::ArPointSet& points) {
    num(out) << "rho[km]\trho_rate[km/s]\n";
    for (const auto& p : points.points) out << p.rho << '\t' << p.rho_rate << '\n';
}

void write_gmm(std::ostream& out, const gmm::GaussianMixture& mix) {
    num(out) << "weight\tx[km]\ty[km]\tz[km]\tvx[km/s]\tvy[km/s]\tvz[km/s]\tcov_upper[row-major]\n";
    for (const auto& c : mix.components) {
        out << c.weight;
        for (Eigen::Index i = 0; i < c.mean.size(); ++i) out << '\t' << c.mean(i);
        for (Eigen::Index i = 0; i < c.cov.rows(); ++i)
            for (Eigen::Index j = i; j < c.cov.cols(); ++j) out << '\t' << c.cov(i, j);
        out << '\n';
    }
}

std::vector<AggregateRow> read_aggregate(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw InvalidInput("read_aggregate: empty input");
    std::vector<AggregateRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        AggregateRow r;
        if (!(ss >> r.scan >> r.policy >> r.div_q25 >> r.div_median >> r.div_q75 >> r.card_q25 >> r.card_median >>
              r.card_q75))
            throw InvalidInput("read_aggregate: malformed line " + std::to_string(lineno));
        rows.push_back(r);
    }
    return rows;
}

void write_report(std::ostream& out, const std::vector<AggregateRow>& rows, const std::vector<std::size_t>& scans) {
    out << std::left << std::setw(6) << "scan" << std::setw(8) << "policy" << std::right << std::setw(14)
        << "div q25" << std::setw(14) << "div median" << std::setw(14) << "div q75" << std::setw(12) << "card q25"
        << std::setw(12) << "card med" << std::setw(12) << "card q75" << '\n';
    out << std::fixed << std::setprecision(3);
    for (auto k : scans) {
        for (const auto& r : rows) {
            if (r.scan != k) continue;
            out << std::left << std::setw(6) << r.scan << std::setw(8) << r.policy << std::right << std::setw(14)
                << r.div_q25 << std::setw(14) << r.div_median << std::setw(14) << r.div_q75 << std::setw(12)
                << r.card_q25 << std::setw(12) << r.card_median << std::setw(12) << r.card_q75 << '\n';
        }
    }
    out.unsetf(std::ios::fixed);
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidInput("cannot write " + path);
    f << contents;
    if (!f) throw InvalidInput("write failed for " + path);
}

}  // namespace seeker::io
