#include "seeker/config.hpp"

#include "json.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace seeker::config {

namespace {

using json = nlohmann::json;

class ConfigError : public InvalidInput {
public:
    ConfigError(const std::string& path, const std::string& what) : InvalidInput("config: " + path + ": " + what) {}
};

// An object being read; remembers which keys were consumed.
class Node {
public:
    Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(display(), "expected an object");
    }

    ~Node() = default;
    Node(const Node&) = delete;
    Node& operator=(const Node&) = delete;

    bool has(const std::string& key) const { return j_.contains(key); }

    double number(const std::string& key) {
        const auto& v = get(key);
        if (!v.is_number()) throw ConfigError(child(key), "expected a number");
        return v.get<double>();
    }
    double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

    std::size_t count(const std::string& key) {
        const auto& v = get(key);
        if (!v.is_number_integer() || v.get<long long>() < 0)
            throw ConfigError(child(key), "expected a nonnegative integer");
        return v.get<std::size_t>();
    }
    std::size_t count(const std::string& key, std::size_t fallback) { return has(key) ? count(key) : fallback; }

    std::string text(const std::string& key) {
        const auto& v = get(key);
        if (!v.is_string()) throw ConfigError(child(key), "expected a string");
        return v.get<std::string>();
    }

    Node object(const std::string& key) { return Node(get(key), child(key)); }

    std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        for (const auto& item : j_.items())
            if (!seen_.count(item.key())) throw ConfigError(child(item.key()), "unknown key");
    }

    std::string display() const { return path_.empty() ? "<root>" : path_; }

private:
    const json& get(const std::string& key) {
        if (!j_.contains(key)) throw ConfigError(child(key), "missing required key");
        seen_.insert(key);
        return j_.at(key);
    }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& path, const std::string& what) {
    if (!ok) throw ConfigError(path, what);
}

astro::ObserverSite read_site(Node n) {
    astro::ObserverSite s;
    s.latitude_deg = n.number("lat_deg");
    s.longitude_deg = n.number("lon_deg");
    s.altitude_km = n.number("alt_km", 0.0);
    require(std::abs(s.latitude_deg) <= 90.0, n.child("lat_deg"), "must lie in [-90, 90]");
    n.finish();
    return s;
}

}  // namespace

Config parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InvalidInput(std::string("config: malformed JSON: ") + e.what());
    }
    Node root(j, "");
    Config cfg;
    auto& s = cfg.scenario;
    s.name = root.has("name") ? root.text("name") : "scenario";
    s.seed = root.count("seed", 1);

    {
        Node el = root.object("truth_elements");
        s.truth_elements.a = el.number("a_km");
        s.truth_elements.e = el.number("e");
        s.truth_elements.i = el.number("i_deg") * kDeg;
        s.truth_elements.raan = el.number("raan_deg") * kDeg;
        s.truth_elements.argp = el.number("argp_deg") * kDeg;
        s.truth_elements.true_anomaly = el.number("nu_deg") * kDeg;
        require(s.truth_elements.a > 0.0, el.child("a_km"), "must be positive");
        require(s.truth_elements.e >= 0.0 && s.truth_elements.e < 1.0, el.child("e"), "must lie in [0, 1)");
        el.finish();
    }
    s.initial_site = read_site(root.object("initial_site"));
    s.followup_site = read_site(root.object("followup_site"));
    s.earth_angle0_deg = root.number("earth_angle0_deg", 0.0);
    s.detection_epoch_s = root.number("detection_epoch_s");
    s.cutout_hours = root.number("cutout_hours");
    require(s.cutout_hours >= 0.0, "cutout_hours", "must be nonnegative");
    s.track_arc_s = root.number("track_arc_s", s.track_arc_s);
    require(s.track_arc_s > 0.0, "track_arc_s", "must be positive");

    {
        Node sn = root.object("sensor");
        s.fov_deg = sn.number("fov_deg");
        s.noise_arcsec = sn.number("noise_arcsec");
        s.p_d = sn.number("p_d");
        require(s.fov_deg > 0.0 && s.fov_deg < 180.0, sn.child("fov_deg"), "must lie in (0, 180)");
        require(s.noise_arcsec > 0.0, sn.child("noise_arcsec"), "must be positive");
        require(s.p_d > 0.0 && s.p_d <= 1.0, sn.child("p_d"), "must lie in (0, 1]");
        sn.finish();
    }
    s.n_scans = root.count("n_scans");
    require(s.n_scans > 0, "n_scans", "must be positive");
    s.scan_dt_s = root.number("scan_dt_s");
    require(s.scan_dt_s > 0.0, "scan_dt_s", "must be positive");

    {
        Node a = root.object("admissible_region");
        s.ar.e_min = a.number("e_min");
        s.ar.e_max = a.number("e_max");
        s.ar.a_min = a.number("a_min_km");
        s.ar.a_max = a.number("a_max_km");
        s.ar.r_periapsis_min = a.number("r_periapsis_min_km", astro::kEarthRadius + 200.0);
        s.ar_n_rho = a.count("n_rho", s.ar_n_rho);
        s.ar_n_rho_rate = a.count("n_rho_rate", s.ar_n_rho_rate);
        require(s.ar.e_min >= 0.0 && s.ar.e_max > s.ar.e_min && s.ar.e_max < 1.0, a.child("e_max"),
                "eccentricity bounds must satisfy 0 <= e_min < e_max < 1");
        require(s.ar.a_min > 0.0 && s.ar.a_max > s.ar.a_min, a.child("a_max_km"),
                "semimajor-axis bounds must satisfy 0 < a_min_km < a_max_km");
        require(s.ar_n_rho >= 2 && s.ar_n_rho_rate >= 2, a.child("n_rho"), "grid needs at least 2 points per axis");
        a.finish();
    }
    s.n_targets = root.count("n_targets");
    require(s.n_targets > 0, "n_targets", "must be positive");
    s.n_clutter = root.count("n_clutter");

    {
        Node cp = root.object("cardinality_prior");
        const auto type = cp.text("type");
        s.cardinality_prior.n_max = cp.count("n_max", s.cardinality_prior.n_max);
        if (type == "poisson") {
            s.cardinality_prior.kind = sim::CardinalityPrior::Kind::poisson;
            s.cardinality_prior.mean = cp.number("mean");
            require(s.cardinality_prior.mean > 0.0, cp.child("mean"), "must be positive");
        } else if (type == "uniform") {
            s.cardinality_prior.kind = sim::CardinalityPrior::Kind::uniform;
            s.cardinality_prior.upper = cp.count("max");
            require(s.cardinality_prior.upper <= s.cardinality_prior.n_max, cp.child("max"), "must not exceed n_max");
        } else {
            throw ConfigError(cp.child("type"), "expected \"poisson\" or \"uniform\"");
        }
        require(s.n_targets <= s.cardinality_prior.n_max, cp.child("n_max"), "must be at least n_targets");
        cp.finish();
    }

    if (root.has("filter")) {
        Node f = root.object("filter");
        s.filter.split.d_mahalanobis = f.number("d_mahalanobis", s.filter.split.d_mahalanobis);
        s.filter.split.max_depth = static_cast<int>(f.count("max_split_depth", static_cast<std::size_t>(s.filter.split.max_depth)));
        s.filter.split.max_components = f.count("max_split_components", s.filter.split.max_components);
        s.filter.prune.max_components = f.count("max_components", s.filter.prune.max_components);
        s.filter.prune.weight_floor = f.number("weight_floor", s.filter.prune.weight_floor);
        s.filter.prune.merge_distance = f.number("merge_distance", s.filter.prune.merge_distance);
        require(s.filter.split.d_mahalanobis > 0.0, f.child("d_mahalanobis"), "must be positive");
        require(s.filter.prune.weight_floor >= 0.0, f.child("weight_floor"), "must be nonnegative");
        require(s.filter.prune.merge_distance >= 0.0, f.child("merge_distance"), "must be nonnegative");
        require(s.filter.split.max_components > 0, f.child("max_split_components"), "must be positive");
        require(s.filter.prune.max_components > 0, f.child("max_components"), "must be positive");
        f.finish();
    }
    if (root.has("catalog")) {
        Node c = root.object("catalog");
        s.catalog_sigma_pos_km = c.number("sigma_pos_km", s.catalog_sigma_pos_km);
        s.catalog_sigma_vel_kms = c.number("sigma_vel_kms", s.catalog_sigma_vel_kms);
        require(s.catalog_sigma_pos_km > 0.0, c.child("sigma_pos_km"), "must be positive");
        require(s.catalog_sigma_vel_kms > 0.0, c.child("sigma_vel_kms"), "must be positive");
        c.finish();
    }
    if (root.has("grid")) {
        Node g = root.object("grid");
        s.grid_tail_mass = g.number("tail_mass", s.grid_tail_mass);
        require(s.grid_tail_mass >= 0.0 && s.grid_tail_mass < 0.5, g.child("tail_mass"), "must lie in [0, 0.5)");
        g.finish();
    }
    if (root.has("reward")) {
        Node r = root.object("reward");
        cfg.reward.alpha = r.number("alpha", cfg.reward.alpha);
        cfg.reward.ell = r.count("ell", cfg.reward.ell);
        cfg.reward.n_samp = r.count("n_samp", cfg.reward.n_samp);
        cfg.reward.n_trials = r.count("n_trials", cfg.reward.n_trials);
        require(cfg.reward.alpha > 0.0 && cfg.reward.alpha != 1.0, r.child("alpha"), "must be positive and not 1");
        require(cfg.reward.ell >= 2, r.child("ell"), "must be at least 2");
        require(cfg.reward.n_samp > cfg.reward.ell, r.child("n_samp"), "must exceed ell");
        require(cfg.reward.n_trials > 0, r.child("n_trials"), "must be positive");
        r.finish();
    }
    cfg.mc_trials = root.count("mc_trials", cfg.mc_trials);
    require(cfg.mc_trials > 0, "mc_trials", "must be positive");
    root.finish();
    cfg.reward.seed = s.seed;
    s.validate();
    return cfg;
}

Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string resolve_config_path(const std::string& name_or_path) {
    if (name_or_path.find('/') != std::string::npos || name_or_path.find(".json") != std::string::npos)
        return name_or_path;
    return std::string(SEEKER_CONFIG_DIR) + "/" + name_or_path + ".json";
}

}  // namespace seeker::config
