#include "cavgame/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "cavgame/errors.hpp"
#include "scenario_json.hpp"

namespace cavgame {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view formation_mode_name(FormationMode m) {
    switch (m) {
        case FormationMode::Algorithm: return "algorithm";
        case FormationMode::Single: return "single";
        case FormationMode::Grand: return "grand";
    }
    return "algorithm";
}

FormationMode formation_mode_from_name(std::string_view s) {
    if (s == "algorithm") return FormationMode::Algorithm;
    if (s == "single") return FormationMode::Single;
    if (s == "grand") return FormationMode::Grand;
    throw std::invalid_argument("unknown formation mode '" + std::string(s) + "'");
}

int Scenario::steps() const { return static_cast<int>(std::lround(duration / planner.dt)); }

namespace {

constexpr double kDeg = M_PI / 180.0;

// Reads one JSON object, remembering which keys were consumed so that
// leftovers can be reported as unknown fields.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw SchemaError(path_.empty() ? "/" : path_, "expected an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    std::string at(const std::string& key) const { return path_ + "/" + key; }

    void number(const std::string& key, double& out) {
        if (!has(key)) return;
        const json& v = j_.at(key);
        if (!v.is_number()) throw SchemaError(at(key), "expected a number");
        out = v.get<double>();
        if (!std::isfinite(out)) throw SchemaError(at(key), "must be finite");
    }

    void degrees(const std::string& key, double& out_rad) {
        double deg = out_rad / kDeg;
        number(key, deg);
        out_rad = deg * kDeg;
    }

    void integer(const std::string& key, int& out) {
        if (!has(key)) return;
        const json& v = j_.at(key);
        if (!v.is_number_integer()) throw SchemaError(at(key), "expected an integer");
        out = v.get<int>();
    }

    void string(const std::string& key, std::string& out) {
        if (!has(key)) return;
        const json& v = j_.at(key);
        if (!v.is_string()) throw SchemaError(at(key), "expected a string");
        out = v.get<std::string>();
    }

    std::string required_string(const std::string& key) {
        if (!has(key)) throw SchemaError(at(key), "required field missing");
        std::string s;
        string(key, s);
        return s;
    }

    void numbers(const std::string& key, std::vector<double>& out, size_t expected = 0) {
        if (!has(key)) return;
        const json& v = j_.at(key);
        if (!v.is_array()) throw SchemaError(at(key), "expected an array");
        if (expected && v.size() != expected) {
            throw SchemaError(at(key), "expected " + std::to_string(expected) + " entries");
        }
        out.clear();
        for (size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) throw SchemaError(at(key) + "/" + std::to_string(i), "expected a number");
            out.push_back(v[i].get<double>());
        }
    }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) throw SchemaError(at(it.key()), "unknown field");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void read_lanes(ObjectReader& r, LaneModel& l) {
    r.integer("count", l.lane_count);
    r.number("width", l.lane_width);
    r.number("lane1_center_y", l.lane1_center_y);
    if (static_cast<int>(l.v_max.size()) != l.lane_count) l.v_max.assign(l.lane_count, 30.0);
    r.numbers("v_max", l.v_max);
    r.integer("ramp_lane", l.ramp_lane);
    std::vector<double> zone{l.merge_start_x, l.merge_end_x};
    r.numbers("merge_zone", zone, 2);
    l.merge_start_x = zone[0];
    l.merge_end_x = zone[1];
    r.number("change_duration", l.change_duration);
}

void read_vehicle_params(ObjectReader& r, VehicleParams& p) {
    r.number("m", p.m);
    r.number("Iz", p.Iz);
    r.number("lf", p.lf);
    r.number("lr", p.lr);
    r.number("Cf", p.Cf);
    r.number("Cr", p.Cr);
    r.number("length", p.length);
    r.number("width", p.width);
}

void read_weights(ObjectReader& r, CostWeights& w) {
    r.number("varpi_v_log", w.varpi_v_log);
    r.number("varpi_s_log", w.varpi_s_log);
    r.number("varpi_v_lat", w.varpi_v_lat);
    r.number("varpi_s_lat", w.varpi_s_lat);
    r.number("varpi_y_lk", w.varpi_y_lk);
    r.number("varpi_phi_lk", w.varpi_phi_lk);
    r.number("varpi_jx", w.varpi_jx);
    r.number("varpi_jy", w.varpi_jy);
    r.number("varpi_e", w.varpi_e);
    r.number("epsilon", w.epsilon);
    r.number("L_V", w.L_V);
    r.number("varpi_ramp", w.varpi_ramp);
    r.number("urgency_start_x", w.urgency_start_x);
}

void read_potential_field(ObjectReader& r, PotentialFieldParams& pf) {
    r.number("hbar", pf.hbar);
    r.number("sigma_x", pf.sigma_x);
    r.number("sigma_y", pf.sigma_y);
    r.number("varrho", pf.varrho);
    r.number("varsigma", pf.varsigma);
}

void read_normalization(ObjectReader& r, Normalization& n) {
    r.number("safety", n.safety);
    r.number("comfort", n.comfort);
    r.number("efficiency", n.efficiency);
}

void read_limits(ObjectReader& r, ConstraintLimits& l) {
    r.number("min_gap", l.min_gap);
    r.number("dy_max", l.dy_max);
    r.degrees("dphi_max_deg", l.dphi_max);
    r.number("ax_max", l.ax_max);
    r.number("ay_max", l.ay_max);
    r.number("jx_max", l.jx_max);
    r.number("jy_max", l.jy_max);
    r.number("vx_max", l.vx_max);
    r.number("r_min", l.r_min);
    r.degrees("delta_max_deg", l.delta_max);
    r.degrees("ddelta_max_deg", l.ddelta_max);
    r.number("dax_max", l.dax_max);
}

void read_characteristic(ObjectReader& r, CharacteristicParams& c) {
    r.number("Q", c.Q);
    std::vector<double> R(c.R.begin(), c.R.end());
    r.numbers("R", R, 3);
    std::copy(R.begin(), R.end(), c.R.begin());
}

void read_solver(ObjectReader& r, SolverConfig& s) {
    r.integer("population", s.population);
    r.integer("iterations", s.iterations);
    r.number("mutation", s.mutation);
    r.number("crossover", s.crossover);
    r.number("penalty", s.penalty);
    r.integer("polish_rounds", s.polish_rounds);
    r.integer("threads", s.threads);
}

void read_formation(ObjectReader& r, FormationConfig& f) {
    if (r.has("mode")) {
        std::string m;
        r.string("mode", m);
        try {
            f.mode = formation_mode_from_name(m);
        } catch (const std::invalid_argument& e) {
            throw SchemaError(r.at("mode"), e.what());
        }
    }
    r.number("gap_threshold", f.gap_threshold);
    r.number("tolerance", f.tolerance);
}

VehicleSpec read_vehicle(ObjectReader& r) {
    VehicleSpec v;
    v.id = r.required_string("id");
    std::string role = "player";
    r.string("role", role);
    if (role != "player" && role != "lead") throw SchemaError(r.at("role"), "expected 'player' or 'lead'");
    v.player = role == "player";
    if (!r.has("lane")) throw SchemaError(r.at("lane"), "required field missing");
    r.integer("lane", v.lane);
    if (!r.has("X")) throw SchemaError(r.at("X"), "required field missing");
    r.number("X", v.X);
    if (!r.has("Y")) throw SchemaError(r.at("Y"), "required field missing");
    r.number("Y", v.Y);
    if (!r.has("vx")) throw SchemaError(r.at("vx"), "required field missing");
    r.number("vx", v.vx);
    std::string profile = "moderate";
    r.string("profile", profile);
    try {
        v.profile = DrivingProfile::from_name(profile);
    } catch (const std::invalid_argument& e) {
        throw SchemaError(r.at("profile"), e.what());
    }
    r.finish();
    return v;
}

template <class F>
void section(ObjectReader& parent, const std::string& key, F&& f) {
    if (!parent.has(key)) return;
    ObjectReader r(parent.raw(key), parent.at(key));
    f(r);
    r.finish();
}

}  // namespace

Scenario parse_scenario(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError("/", std::string("invalid JSON: ") + e.what());
    }
    Scenario s;
    ObjectReader r(j, "");
    s.name = r.required_string("name");
    r.string("description", s.description);
    if (r.has("seed")) {
        const json& v = r.raw("seed");
        if (!v.is_number_unsigned()) throw SchemaError("/seed", "expected a nonnegative integer");
        s.seed = v.get<std::uint64_t>();
    }
    r.number("dt", s.planner.dt);
    r.number("duration", s.duration);
    section(r, "horizon", [&](ObjectReader& o) {
        o.integer("np", s.planner.horizon.np);
        o.integer("nc", s.planner.horizon.nc);
    });
    section(r, "formation", [&](ObjectReader& o) { read_formation(o, s.formation); });
    section(r, "lanes", [&](ObjectReader& o) { read_lanes(o, s.planner.lanes); });
    section(r, "vehicle_params", [&](ObjectReader& o) { read_vehicle_params(o, s.planner.vehicle); });
    section(r, "cost_weights", [&](ObjectReader& o) { read_weights(o, s.planner.costs.weights); });
    section(r, "potential_field", [&](ObjectReader& o) { read_potential_field(o, s.planner.costs.potential_field); });
    section(r, "normalization", [&](ObjectReader& o) { read_normalization(o, s.planner.costs.normalization); });
    section(r, "limits", [&](ObjectReader& o) { read_limits(o, s.planner.limits); });
    section(r, "characteristic", [&](ObjectReader& o) { read_characteristic(o, s.planner.characteristic); });
    section(r, "solver", [&](ObjectReader& o) { read_solver(o, s.planner.solver); });

    if (!r.has("vehicles")) throw SchemaError("/vehicles", "required field missing");
    const json& vs = r.raw("vehicles");
    if (!vs.is_array()) throw SchemaError("/vehicles", "expected an array");
    for (size_t i = 0; i < vs.size(); ++i) {
        ObjectReader vr(vs[i], "/vehicles/" + std::to_string(i));
        s.vehicles.push_back(read_vehicle(vr));
    }
    r.finish();
    validate_scenario(s);
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path.string(), "cannot open scenario file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

void validate_scenario(const Scenario& s) {
    auto semantic = [](const std::string& msg) { throw SemanticError(msg); };
    const PlannerConfig& p = s.planner;
    try {
        p.horizon.validate();
        p.vehicle.validate();
        p.lanes.validate();
        p.costs.weights.validate();
        p.costs.potential_field.validate();
        p.costs.normalization.validate();
        p.limits.validate();
        p.solver.validate();
    } catch (const std::invalid_argument& e) {
        semantic(e.what());
    }
    if (!(p.dt > 0)) semantic("dt must be positive");
    if (!(s.duration > 0)) semantic("duration must be positive");
    if (!(s.formation.gap_threshold >= 0)) semantic("gap_threshold must be nonnegative");
    if (!(s.formation.tolerance >= 0)) semantic("formation tolerance must be nonnegative");
    for (double r : p.characteristic.R) {
        if (!(r >= 0)) semantic("effort weights must be nonnegative");
    }
    if (!(p.characteristic.Q >= 0)) semantic("Q must be nonnegative");

    std::set<std::string> ids;
    int players = 0;
    for (const auto& v : s.vehicles) {
        if (v.id.empty()) semantic("vehicle id must not be empty");
        if (!ids.insert(v.id).second) semantic("duplicate vehicle id " + v.id);
        if (!p.lanes.has_lane(v.lane)) semantic("vehicle " + v.id + " on unknown lane " + std::to_string(v.lane));
        if (std::abs(v.Y - p.lanes.center_y(v.lane)) > p.lanes.lane_width / 2) {
            semantic("vehicle " + v.id + " is not inside lane " + std::to_string(v.lane));
        }
        if (v.vx < kVxFloor) semantic("vehicle " + v.id + " is slower than the velocity floor");
        players += v.player;
    }
    if (players == 0) semantic("scenario has no players");
    if (players > 12) semantic("at most 12 players are supported");
    for (size_t i = 0; i < s.vehicles.size(); ++i) {
        for (size_t j = i + 1; j < s.vehicles.size(); ++j) {
            const auto& a = s.vehicles[i];
            const auto& b = s.vehicles[j];
            const double g = std::max(std::abs(a.X - b.X) - p.vehicle.length, std::abs(a.Y - b.Y) - p.vehicle.width);
            if (g < 0) semantic("vehicles " + a.id + " and " + b.id + " overlap");
        }
    }
}

namespace detail {

ordered_json scenario_echo(const Scenario& s) {
    const PlannerConfig& p = s.planner;
    ordered_json j;
    j["name"] = s.name;
    j["description"] = s.description;
    j["seed"] = s.seed;
    j["dt"] = p.dt;
    j["duration"] = s.duration;
    j["horizon"] = {{"np", p.horizon.np}, {"nc", p.horizon.nc}};
    j["formation"] = {{"mode", formation_mode_name(s.formation.mode)},
                      {"gap_threshold", s.formation.gap_threshold},
                      {"tolerance", s.formation.tolerance}};
    j["lanes"] = {{"count", p.lanes.lane_count},
                  {"width", p.lanes.lane_width},
                  {"lane1_center_y", p.lanes.lane1_center_y},
                  {"v_max", p.lanes.v_max},
                  {"ramp_lane", p.lanes.ramp_lane},
                  {"merge_zone", {p.lanes.merge_start_x, p.lanes.merge_end_x}},
                  {"change_duration", p.lanes.change_duration}};
    j["vehicle_params"] = {{"m", p.vehicle.m},   {"Iz", p.vehicle.Iz},         {"lf", p.vehicle.lf},
                           {"lr", p.vehicle.lr}, {"Cf", p.vehicle.Cf},         {"Cr", p.vehicle.Cr},
                           {"length", p.vehicle.length}, {"width", p.vehicle.width}};
    const CostWeights& w = p.costs.weights;
    j["cost_weights"] = {{"varpi_v_log", w.varpi_v_log}, {"varpi_s_log", w.varpi_s_log},
                         {"varpi_v_lat", w.varpi_v_lat}, {"varpi_s_lat", w.varpi_s_lat},
                         {"varpi_y_lk", w.varpi_y_lk},   {"varpi_phi_lk", w.varpi_phi_lk},
                         {"varpi_jx", w.varpi_jx},       {"varpi_jy", w.varpi_jy},
                         {"varpi_e", w.varpi_e},         {"epsilon", w.epsilon},
                         {"L_V", w.L_V},                 {"varpi_ramp", w.varpi_ramp},
                         {"urgency_start_x", w.urgency_start_x}};
    const PotentialFieldParams& pf = p.costs.potential_field;
    j["potential_field"] = {{"hbar", pf.hbar},
                            {"sigma_x", pf.sigma_x},
                            {"sigma_y", pf.sigma_y},
                            {"varrho", pf.varrho},
                            {"varsigma", pf.varsigma}};
    const Normalization& n = p.costs.normalization;
    j["normalization"] = {{"safety", n.safety}, {"comfort", n.comfort}, {"efficiency", n.efficiency}};
    const ConstraintLimits& l = p.limits;
    j["limits"] = {{"min_gap", l.min_gap},
                   {"dy_max", l.dy_max},
                   {"dphi_max_deg", l.dphi_max / kDeg},
                   {"ax_max", l.ax_max},
                   {"ay_max", l.ay_max},
                   {"jx_max", l.jx_max},
                   {"jy_max", l.jy_max},
                   {"vx_max", l.vx_max},
                   {"r_min", l.r_min},
                   {"delta_max_deg", l.delta_max / kDeg},
                   {"ddelta_max_deg", l.ddelta_max / kDeg},
                   {"dax_max", l.dax_max}};
    j["characteristic"] = {{"Q", p.characteristic.Q}, {"R", p.characteristic.R}};
    const SolverConfig& sc = p.solver;
    j["solver"] = {{"population", sc.population}, {"iterations", sc.iterations}, {"mutation", sc.mutation},
                   {"crossover", sc.crossover},   {"penalty", sc.penalty},       {"polish_rounds", sc.polish_rounds},
                   {"threads", sc.threads}};
    ordered_json vs = ordered_json::array();
    for (const auto& v : s.vehicles) {
        vs.push_back({{"id", v.id},
                      {"role", v.player ? "player" : "lead"},
                      {"lane", v.lane},
                      {"X", v.X},
                      {"Y", v.Y},
                      {"vx", v.vx},
                      {"profile", v.profile.name}});
    }
    j["vehicles"] = vs;
    return j;
}

}  // namespace detail

std::string scenario_to_json(const Scenario& s, int indent) { return detail::scenario_echo(s).dump(indent); }

}  // namespace cavgame
