#include "ecofl/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ecofl {

namespace {

using nlohmann::json;

void require(bool cond, const std::string& what) {
    if (!cond) throw ConfigError(what);
}

double positive(double v, const char* name) {
    require(std::isfinite(v) && v > 0.0, std::string(name) + " must be positive");
    return v;
}

// ---------------------------------------------------------------------
// Quantity parsing: a numeric JSON value is taken as-is (SI); a string
// carries an explicit unit suffix, e.g. "-80 dBm", "20 MHz", "50 Mb".
// ---------------------------------------------------------------------

enum class Unit { plain, power_w, bits, hertz, meters, seconds, speed };

double convert_unit(double value, const std::string& unit, Unit kind,
                    const std::string& key) {
    auto bad = [&]() -> double {
        throw ConfigError("config key '" + key + "': unsupported unit '" +
                          unit + "'");
    };
    switch (kind) {
        case Unit::plain:
            return unit.empty() ? value : bad();
        case Unit::power_w:
            if (unit == "W") return value;
            if (unit == "mW") return value * 1e-3;
            if (unit == "dBm") return std::pow(10.0, value / 10.0) * 1e-3;
            if (unit == "dBW") return std::pow(10.0, value / 10.0);
            return bad();
        case Unit::bits:
            if (unit == "b" || unit == "bit" || unit == "bits") return value;
            if (unit == "kb") return value * 1e3;
            if (unit == "Mb") return value * 1e6;
            if (unit == "Gb") return value * 1e9;
            if (unit == "B") return value * 8.0;
            if (unit == "MB") return value * 8e6;
            return bad();
        case Unit::hertz:
            if (unit == "Hz") return value;
            if (unit == "kHz") return value * 1e3;
            if (unit == "MHz") return value * 1e6;
            if (unit == "GHz") return value * 1e9;
            return bad();
        case Unit::meters:
            if (unit == "m") return value;
            if (unit == "km") return value * 1e3;
            return bad();
        case Unit::seconds:
            if (unit == "s") return value;
            if (unit == "ms") return value * 1e-3;
            if (unit == "min") return value * 60.0;
            return bad();
        case Unit::speed:
            if (unit == "m/s" || unit == "mps") return value;
            if (unit == "km/h") return value / 3.6;
            return bad();
    }
    return bad();
}

double parse_quantity(const json& v, Unit kind, const std::string& key) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        std::istringstream in(s);
        double value = 0.0;
        in >> value;
        if (in.fail())
            throw ConfigError("config key '" + key +
                              "': cannot parse quantity '" + s + "'");
        std::string unit;
        in >> unit;
        std::string rest;
        in >> rest;
        if (!rest.empty())
            throw ConfigError("config key '" + key +
                              "': trailing text in quantity '" + s + "'");
        return convert_unit(value, unit, kind, key);
    }
    throw ConfigError("config key '" + key + "': expected number or string");
}

// Wraps a json object, tracking which keys were consumed so that leftover
// (unknown) keys can be rejected.
class ObjectReader {
  public:
    ObjectReader(const json& j, std::string path)
        : j_(j), path_(std::move(path)) {
        if (!j.is_object())
            throw ConfigError("config: '" + path_ + "' must be an object");
    }

    bool has(const std::string& key) {
        return j_.contains(key);
    }
    const json& get(const std::string& key) {
        seen_.push_back(key);
        return j_.at(key);
    }
    double number(const std::string& key, double fallback,
                  Unit kind = Unit::plain) {
        if (!has(key)) return fallback;
        return parse_quantity(get(key), kind, path_ + key);
    }
    int integer(const std::string& key, int fallback) {
        if (!has(key)) return fallback;
        const json& v = get(key);
        if (!v.is_number_integer())
            throw ConfigError("config key '" + path_ + key +
                              "' must be an integer");
        return v.get<int>();
    }
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            bool known = false;
            for (const auto& s : seen_)
                if (s == it.key()) known = true;
            if (!known)
                throw ConfigError("config: unknown key '" + path_ + it.key() +
                                  "'");
        }
    }

  private:
    const json& j_;
    std::string path_;
    std::vector<std::string> seen_;
};

Vec2 parse_vec2(const json& v, const std::string& key) {
    if (!v.is_array() || v.size() != 2)
        throw ConfigError("config key '" + key + "' must be [x, y]");
    return Vec2(parse_quantity(v[0], Unit::meters, key),
                parse_quantity(v[1], Unit::meters, key));
}

}  // namespace

// -----------------------------------------------------------------------
// Validation
// -----------------------------------------------------------------------

void RotorModel::validate_or_throw() const {
    positive(blade_power_w, "rotor.blade_power_w");
    positive(induced_power_w, "rotor.induced_power_w");
    positive(tip_speed_mps, "rotor.tip_speed_mps");
    positive(hover_induced_mps, "rotor.hover_induced_mps");
    positive(drag_ratio, "rotor.drag_ratio");
    positive(air_density, "rotor.air_density");
    positive(rotor_solidity, "rotor.rotor_solidity");
    positive(disc_area_m2, "rotor.disc_area_m2");
}

void FLHyperparams::validate_or_throw() const {
    positive(eta, "fl.eta");
    positive(mu, "fl.mu");
    positive(smoothness, "fl.smoothness");
    require(mu <= smoothness, "fl: mu must not exceed smoothness");
    require(eta <= 1.0 / (2.0 * smoothness),
            "fl.eta must satisfy eta <= 1/(2 L)");
    require(eps_v2 >= 0.0, "fl.eps_v2 must be nonnegative");
    require(eps_s2 >= 0.0, "fl.eps_s2 must be nonnegative");
    require(eps_w >= 0.0, "fl.eps_w must be nonnegative");
    require(w0_gap >= 0.0, "fl.w0_gap must be nonnegative");
}

void ScenarioConfig::validate_or_throw() const {
    positive(area_x_m, "area_x_m");
    positive(area_y_m, "area_y_m");
    require(ue_pos_m.rows() >= 1, "at least one UE required");
    for (int k = 0; k < num_ues(); ++k) {
        require(ue_pos_m(k, 0) >= 0.0 && ue_pos_m(k, 0) <= area_x_m &&
                    ue_pos_m(k, 1) >= 0.0 && ue_pos_m(k, 1) <= area_y_m,
                "ue_positions_m[" + std::to_string(k) + "] outside the area");
    }
    positive(altitude_m, "altitude_m");
    positive(speed_mps, "speed_mps");
    auto inside = [&](const Vec2& p, const char* name) {
        require(p.x() >= 0.0 && p.x() <= area_x_m && p.y() >= 0.0 &&
                    p.y() <= area_y_m,
                std::string(name) + " outside the area");
    };
    inside(q_initial_m, "q_initial_m");
    inside(q_final_m, "q_final_m");
    require(num_slots >= 3, "num_slots must be at least 3");
    positive(mission_s, "mission_s");
    positive(t_cm_s, "t_cm_s");
    require(t_agg_s >= 0.0, "t_agg_s must be nonnegative");
    positive(t_bc_s, "t_bc_s");
    positive(bandwidth_hz, "bandwidth_hz");
    positive(carrier_hz, "carrier_hz");
    positive(noise_w, "noise_w");
    positive(ue_power_max_w, "ue_power_max_w");
    positive(uav_power_max_w, "uav_power_max_w");
    positive(model_bits, "model_bits");
    positive(cycles_per_bit, "cycles_per_bit");
    positive(chip_coeff, "chip_coeff");
    require(ue_cpu_hz.size() == num_ues(),
            "ue_cpu_hz must have one entry per UE");
    for (int k = 0; k < num_ues(); ++k) positive(ue_cpu_hz(k), "ue_cpu_hz[k]");
    require(local_iters >= 1, "local_iters must be at least 1");
    require(participation_min >= 1 && participation_min <= num_ues(),
            "participation_min must be in [1, K]");
    require(data_floor_bits >= 0.0, "data_floor_bits must be nonnegative");
    positive(accuracy_eps, "accuracy_eps");
    fl.validate_or_throw();
    rotor.validate_or_throw();
}

DecisionState DecisionState::zeros(const ScenarioConfig& cfg) {
    DecisionState s;
    const int n = cfg.num_slots;
    const int k = cfg.num_ues();
    const int r = cfg.num_rounds();
    s.q = MatX2::Zero(n + 1, 2);
    s.a = Eigen::MatrixXi::Zero(k, r);
    s.data_bits = Eigen::MatrixXd::Zero(k, r);
    s.ue_power_w = Eigen::MatrixXd::Zero(k, r);
    s.uav_power_w = Eigen::VectorXd::Zero(cfg.num_broadcasts());
    s.hover_s = Eigen::VectorXd::Zero(r);
    return s;
}

void ViolationReport::add(std::string name, double amount) {
    items.push_back({std::move(name), amount});
    if (amount > max_violation) max_violation = amount;
}

double fly_time(const MatX2& q, int n, double speed_mps) {
    if (n < 1 || n >= q.rows())
        throw std::out_of_range("fly_time: segment index out of range");
    return (q.row(n) - q.row(n - 1)).norm() / speed_mps;
}

ViolationReport check_timeslot_feasibility(const DecisionState& state,
                                           const ScenarioConfig& cfg) {
    ViolationReport rep;
    const int n_slots = cfg.num_slots;
    const int rounds = cfg.num_rounds();
    double used_s = 0.0;
    for (int n = 1; n <= n_slots; ++n)
        used_s += fly_time(state.q, n, cfg.speed_mps);
    for (int r = 0; r < rounds; ++r) {
        rep.add("hover_covers_uplink[" + std::to_string(r) + "]",
                cfg.t_cm_s - state.hover_s(r));
        used_s += state.hover_s(r) + cfg.t_agg_s;
        const double window =
            fly_time(state.q, r + 1, cfg.speed_mps) + state.hover_s(r);
        for (int k = 0; k < cfg.num_ues(); ++k) {
            if (state.a(k, r) == 0) continue;
            const double need =
                cfg.t_cm_s + state.data_bits(k, r) * cfg.compute_s_per_bit(k);
            rep.add("slot_window[" + std::to_string(k) + "," +
                        std::to_string(r) + "]",
                    need - window);
        }
    }
    used_s += cfg.t_bc_s * cfg.num_broadcasts();
    rep.add("mission_time", used_s - cfg.mission_s);
    return rep;
}

ScenarioConfig default_config() {
    ScenarioConfig cfg;
    cfg.ue_pos_m.resize(6, 2);
    cfg.ue_pos_m << 0.0, 400.0,
        100.0, 600.0,
        100.0, 400.0,
        400.0, 600.0,
        400.0, 400.0,
        500.0, 400.0;
    cfg.ue_cpu_hz = Eigen::VectorXd::Constant(6, 1.0e8);
    cfg.validate_or_throw();
    return cfg;
}

// -----------------------------------------------------------------------
// JSON I/O
// -----------------------------------------------------------------------

ScenarioConfig parse_config_json(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    ObjectReader top(root, "");
    ScenarioConfig cfg = default_config();

    if (top.has("area_m")) {
        const json& a = top.get("area_m");
        if (!a.is_array() || a.size() != 2)
            throw ConfigError("config key 'area_m' must be [x, y]");
        cfg.area_x_m = parse_quantity(a[0], Unit::meters, "area_m");
        cfg.area_y_m = parse_quantity(a[1], Unit::meters, "area_m");
    }
    if (top.has("ue_positions_m")) {
        const json& u = top.get("ue_positions_m");
        if (!u.is_array() || u.empty())
            throw ConfigError("config key 'ue_positions_m' must be a "
                              "non-empty array of [x, y]");
        cfg.ue_pos_m.resize(static_cast<int>(u.size()), 2);
        for (int k = 0; k < static_cast<int>(u.size()); ++k) {
            Vec2 p = parse_vec2(u[k], "ue_positions_m");
            cfg.ue_pos_m.row(k) = p.transpose();
        }
        // keep per-UE clocks consistent unless overridden below
        cfg.ue_cpu_hz =
            Eigen::VectorXd::Constant(cfg.ue_pos_m.rows(), 1.0e8);
    }
    cfg.altitude_m = top.number("altitude_m", cfg.altitude_m, Unit::meters);
    cfg.speed_mps = top.number("speed_mps", cfg.speed_mps, Unit::speed);
    if (top.has("q_initial_m"))
        cfg.q_initial_m = parse_vec2(top.get("q_initial_m"), "q_initial_m");
    if (top.has("q_final_m"))
        cfg.q_final_m = parse_vec2(top.get("q_final_m"), "q_final_m");
    cfg.num_slots = top.integer("num_slots", cfg.num_slots);
    cfg.mission_s = top.number("mission_time", cfg.mission_s, Unit::seconds);
    cfg.t_cm_s = top.number("uplink_window", cfg.t_cm_s, Unit::seconds);
    cfg.t_agg_s = top.number("aggregation_time", cfg.t_agg_s, Unit::seconds);
    cfg.t_bc_s = top.number("broadcast_window", cfg.t_bc_s, Unit::seconds);
    cfg.bandwidth_hz = top.number("bandwidth", cfg.bandwidth_hz, Unit::hertz);
    cfg.carrier_hz = top.number("carrier", cfg.carrier_hz, Unit::hertz);
    cfg.noise_w = top.number("noise", cfg.noise_w, Unit::power_w);
    cfg.ue_power_max_w =
        top.number("ue_power_max", cfg.ue_power_max_w, Unit::power_w);
    cfg.uav_power_max_w =
        top.number("uav_power_max", cfg.uav_power_max_w, Unit::power_w);
    cfg.model_bits = top.number("model_size", cfg.model_bits, Unit::bits);
    cfg.cycles_per_bit = top.number("cycles_per_bit", cfg.cycles_per_bit);
    cfg.chip_coeff = top.number("chip_coeff", cfg.chip_coeff);
    if (top.has("ue_cpu_hz")) {
        const json& f = top.get("ue_cpu_hz");
        if (f.is_array()) {
            if (static_cast<int>(f.size()) != cfg.num_ues())
                throw ConfigError(
                    "config key 'ue_cpu_hz' must have one entry per UE");
            cfg.ue_cpu_hz.resize(cfg.num_ues());
            for (int k = 0; k < cfg.num_ues(); ++k)
                cfg.ue_cpu_hz(k) = parse_quantity(f[k], Unit::hertz,
                                                  "ue_cpu_hz");
        } else {
            cfg.ue_cpu_hz = Eigen::VectorXd::Constant(
                cfg.num_ues(), parse_quantity(f, Unit::hertz, "ue_cpu_hz"));
        }
    }
    cfg.local_iters = top.integer("local_iters", cfg.local_iters);
    cfg.participation_min =
        top.integer("participation_min", cfg.participation_min);
    cfg.data_floor_bits =
        top.number("data_floor", cfg.data_floor_bits, Unit::bits);
    cfg.accuracy_eps = top.number("accuracy_eps", cfg.accuracy_eps);

    if (top.has("fl")) {
        ObjectReader fr(top.get("fl"), "fl.");
        cfg.fl.eta = fr.number("eta", cfg.fl.eta);
        cfg.fl.mu = fr.number("mu", cfg.fl.mu);
        cfg.fl.smoothness = fr.number("smoothness", cfg.fl.smoothness);
        cfg.fl.eps_v2 = fr.number("eps_v2", cfg.fl.eps_v2);
        cfg.fl.eps_s2 = fr.number("eps_s2", cfg.fl.eps_s2);
        cfg.fl.eps_w = fr.number("eps_w", cfg.fl.eps_w);
        cfg.fl.w0_gap = fr.number("w0_gap", cfg.fl.w0_gap);
        fr.finish();
    }
    if (top.has("rotor")) {
        ObjectReader rr(top.get("rotor"), "rotor.");
        cfg.rotor.blade_power_w =
            rr.number("blade_power_w", cfg.rotor.blade_power_w);
        cfg.rotor.induced_power_w =
            rr.number("induced_power_w", cfg.rotor.induced_power_w);
        cfg.rotor.tip_speed_mps =
            rr.number("tip_speed_mps", cfg.rotor.tip_speed_mps, Unit::speed);
        cfg.rotor.hover_induced_mps = rr.number(
            "hover_induced_mps", cfg.rotor.hover_induced_mps, Unit::speed);
        cfg.rotor.drag_ratio = rr.number("drag_ratio", cfg.rotor.drag_ratio);
        cfg.rotor.air_density =
            rr.number("air_density", cfg.rotor.air_density);
        cfg.rotor.rotor_solidity =
            rr.number("rotor_solidity", cfg.rotor.rotor_solidity);
        cfg.rotor.disc_area_m2 =
            rr.number("disc_area_m2", cfg.rotor.disc_area_m2);
        rr.finish();
    }
    top.finish();
    cfg.validate_or_throw();
    return cfg;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_json(ss.str());
}

std::string config_to_json(const ScenarioConfig& cfg) {
    json j;
    j["area_m"] = {cfg.area_x_m, cfg.area_y_m};
    json ues = json::array();
    for (int k = 0; k < cfg.num_ues(); ++k)
        ues.push_back({cfg.ue_pos_m(k, 0), cfg.ue_pos_m(k, 1)});
    j["ue_positions_m"] = ues;
    j["altitude_m"] = cfg.altitude_m;
    j["speed_mps"] = cfg.speed_mps;
    j["q_initial_m"] = {cfg.q_initial_m.x(), cfg.q_initial_m.y()};
    j["q_final_m"] = {cfg.q_final_m.x(), cfg.q_final_m.y()};
    j["num_slots"] = cfg.num_slots;
    j["mission_time"] = cfg.mission_s;
    j["uplink_window"] = cfg.t_cm_s;
    j["aggregation_time"] = cfg.t_agg_s;
    j["broadcast_window"] = cfg.t_bc_s;
    j["bandwidth"] = cfg.bandwidth_hz;
    j["carrier"] = cfg.carrier_hz;
    j["noise"] = cfg.noise_w;
    j["ue_power_max"] = cfg.ue_power_max_w;
    j["uav_power_max"] = cfg.uav_power_max_w;
    j["model_size"] = cfg.model_bits;
    j["cycles_per_bit"] = cfg.cycles_per_bit;
    j["chip_coeff"] = cfg.chip_coeff;
    json clocks = json::array();
    for (int k = 0; k < cfg.num_ues(); ++k) clocks.push_back(cfg.ue_cpu_hz(k));
    j["ue_cpu_hz"] = clocks;
    j["local_iters"] = cfg.local_iters;
    j["participation_min"] = cfg.participation_min;
    j["data_floor"] = cfg.data_floor_bits;
    j["accuracy_eps"] = cfg.accuracy_eps;
    j["fl"] = {{"eta", cfg.fl.eta},
               {"mu", cfg.fl.mu},
               {"smoothness", cfg.fl.smoothness},
               {"eps_v2", cfg.fl.eps_v2},
               {"eps_s2", cfg.fl.eps_s2},
               {"eps_w", cfg.fl.eps_w},
               {"w0_gap", cfg.fl.w0_gap}};
    j["rotor"] = {{"blade_power_w", cfg.rotor.blade_power_w},
                  {"induced_power_w", cfg.rotor.induced_power_w},
                  {"tip_speed_mps", cfg.rotor.tip_speed_mps},
                  {"hover_induced_mps", cfg.rotor.hover_induced_mps},
                  {"drag_ratio", cfg.rotor.drag_ratio},
                  {"air_density", cfg.rotor.air_density},
                  {"rotor_solidity", cfg.rotor.rotor_solidity},
                  {"disc_area_m2", cfg.rotor.disc_area_m2}};
    return j.dump(2);
}

}  // namespace ecofl
