#include "cavgame/trace_io.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "cavgame/errors.hpp"
#include "scenario_json.hpp"

namespace cavgame {

namespace {

void put_number(std::ostream& os, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError(path.string(), "cannot open for writing");
    f << text;
    if (!f) throw IoError(path.string(), "write failed");
}

}  // namespace

void write_trace_csv(const Trace& trace, std::ostream& os) {
    os << kTraceHeader << '\n';
    for (const auto& r : trace.rows) {
        put_number(os, r.t);
        os << ',' << r.vehicle_id;
        for (double v : {r.state.X, r.state.Y, r.state.vx, r.state.vy, r.state.phi, r.state.r, r.control.ax,
                         r.control.delta_f}) {
            os << ',';
            put_number(os, v);
        }
        os << ',' << r.beta << ',' << r.lane << ',' << r.coalition_id;
        for (double v : {r.cost.J_s, r.cost.J_c, r.cost.J_e, r.cost.J_total}) {
            os << ',';
            put_number(os, v);
        }
        os << '\n';
    }
}

std::string trace_to_csv(const Trace& trace) {
    std::ostringstream os;
    write_trace_csv(trace, os);
    return os.str();
}

void export_trace(const Trace& trace, const std::filesystem::path& path) { write_file(path, trace_to_csv(trace)); }

Trace read_trace_csv(std::istream& is, const std::string& source) {
    std::string line;
    if (!std::getline(is, line)) throw IoError(source, "empty trace");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kTraceHeader) throw SchemaError(source + ":1", "unexpected trace header");
    Trace trace;
    std::map<double, int> step_of;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split_csv(line);
        const std::string where = source + ":" + std::to_string(lineno);
        if (f.size() != 17) throw SchemaError(where, "expected 17 columns, got " + std::to_string(f.size()));
        TraceRow r;
        try {
            r.t = std::stod(f[0]);
            r.vehicle_id = f[1];
            r.state = {std::stod(f[4]), std::stod(f[5]), std::stod(f[7]), std::stod(f[6]), std::stod(f[2]),
                       std::stod(f[3])};
            r.control = {std::stod(f[8]), std::stod(f[9])};
            r.beta = std::stoi(f[10]);
            r.lane = std::stoi(f[11]);
            r.coalition_id = std::stoi(f[12]);
            r.cost.J_s = std::stod(f[13]);
            r.cost.J_c = std::stod(f[14]);
            r.cost.J_e = std::stod(f[15]);
            r.cost.J_total = std::stod(f[16]);
        } catch (const std::logic_error&) {
            throw SchemaError(where, "malformed number");
        }
        auto [it, inserted] = step_of.try_emplace(r.t, static_cast<int>(step_of.size()));
        r.step = it->second;
        trace.rows.push_back(std::move(r));
    }
    return trace;
}

Trace import_trace(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError(path.string(), "cannot open for reading");
    return read_trace_csv(f, path.string());
}

std::string summary_to_json(const RunSummary& s, int indent) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["scenario"] = s.scenario;
    j["seed"] = s.seed;
    j["formation"] = s.formation;
    j["steps"] = s.steps;
    j["completed"] = s.completed;
    if (s.abort) {
        j["abort"] = ordered_json{{"step", s.abort->step},
                                  {"t", s.abort->t},
                                  {"first", s.abort->first},
                                  {"second", s.abort->second},
                                  {"gap", s.abort->gap}};
    } else {
        j["abort"] = nullptr;
    }
    ordered_json vehicles = ordered_json::array();
    for (const auto& v : s.vehicles) {
        vehicles.push_back(ordered_json{{"id", v.id},
                                        {"player", v.player},
                                        {"profile", v.profile},
                                        {"rms_cost", v.rms_cost},
                                        {"rms_lambda", v.rms_lambda},
                                        {"rms_safety", v.rms_safety},
                                        {"rms_comfort", v.rms_comfort},
                                        {"rms_efficiency", v.rms_efficiency},
                                        {"min_gap", v.min_gap},
                                        {"final_vx", v.final_vx},
                                        {"final_lane", v.final_lane},
                                        {"fallbacks", v.fallbacks}});
    }
    j["vehicles"] = std::move(vehicles);
    ordered_json changes = ordered_json::array();
    for (const auto& c : s.lane_changes) {
        ordered_json e{{"vehicle_id", c.vehicle_id}, {"from", c.from}, {"to", c.to}, {"start_t", c.start_t}};
        e["end_t"] = c.end_t ? ordered_json(*c.end_t) : ordered_json(nullptr);
        changes.push_back(std::move(e));
    }
    j["lane_changes"] = std::move(changes);
    j["solver"] = ordered_json{{"mean_step_seconds", s.solver.mean_step_seconds},
                               {"max_step_seconds", s.solver.max_step_seconds},
                               {"total_seconds", s.solver.total_seconds},
                               {"mean_evaluations", s.solver.mean_evaluations}};
    ordered_json timeline = ordered_json::array();
    for (const auto& r : s.timeline) {
        ordered_json e{{"step", r.step},
                       {"t", r.t},
                       {"partition", r.partition},
                       {"type", std::string(coalition_type_name(r.type))}};
        ordered_json subs = ordered_json::array();
        for (const auto& sc : r.sub_coalitions) {
            subs.push_back(ordered_json{{"members", sc.members},
                                        {"standalone", sc.standalone},
                                        {"allocation", sc.allocation},
                                        {"defected", sc.defected}});
        }
        e["sub_coalitions"] = std::move(subs);
        e["grand_value"] = r.grand_value ? ordered_json(*r.grand_value) : ordered_json(nullptr);
        e["solve_seconds"] = r.solve_seconds;
        e["evaluations"] = r.evaluations;
        e["fallbacks"] = r.fallbacks;
        timeline.push_back(std::move(e));
    }
    j["timeline"] = std::move(timeline);
    j["config"] = detail::scenario_echo(s.config);
    return j.dump(indent);
}

void export_summary(const RunSummary& summary, const std::filesystem::path& path) {
    write_file(path, summary_to_json(summary) + "\n");
}

}  // namespace cavgame
