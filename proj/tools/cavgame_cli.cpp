#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cavgame/errors.hpp"
#include "cavgame/scenario.hpp"
#include "cavgame/simulation.hpp"
#include "cavgame/trace_io.hpp"

namespace fs = std::filesystem;
using namespace cavgame;

namespace {

enum Exit { kOk = 0, kUsage = 1, kSchema = 2, kAbort = 3 };

// 0 quiet, 1 normal (default), 2 per-step progress
int log_level() {
    const char* env = std::getenv("CAVGAME_LOG");
    if (!env) return 1;
    const std::string v = env;
    if (v == "quiet" || v == "0") return 0;
    if (v == "debug" || v == "2") return 2;
    return 1;
}

void print_overview(const RunSummary& s) {
    std::cout << "scenario " << s.scenario << " seed " << s.seed << " formation " << s.formation << ": " << s.steps
              << " steps" << (s.completed ? "" : " (aborted)") << "\n";
    for (const auto& v : s.vehicles) {
        if (!v.player) continue;
        std::cout << "  " << v.id << " rms_cost " << v.rms_cost << " min_gap " << v.min_gap << " final_lane "
                  << v.final_lane << " final_vx " << v.final_vx << "\n";
    }
    for (const auto& c : s.lane_changes) {
        std::cout << "  lane change " << c.vehicle_id << " " << c.from << "->" << c.to << " at t=" << c.start_t;
        if (c.end_t) std::cout << " done t=" << *c.end_t;
        std::cout << "\n";
    }
    std::string last;
    for (const auto& r : s.timeline) {
        if (r.partition == last) continue;
        last = r.partition;
        std::cout << "  t=" << r.t << " " << r.partition << "\n";
    }
    if (s.solver.total_seconds > 0) std::cout << "  mean step solve " << s.solver.mean_step_seconds << " s\n";
}

int cmd_run(const std::string& scenario_path, const std::string& out_dir, std::optional<std::uint64_t> seed,
            std::optional<double> duration, std::optional<std::string> formation, std::optional<int> threads) {
    Scenario s = load_scenario(scenario_path);
    if (seed) s.seed = *seed;
    if (duration) s.duration = *duration;
    if (formation) s.formation.mode = formation_mode_from_name(*formation);
    if (threads) s.planner.solver.threads = *threads;
    validate_scenario(s);
    if (log_level() >= 1) std::cerr << "running " << s.name << " for " << s.steps() << " steps\n";
    const RunResult r = run_closed_loop(s);
    fs::create_directories(out_dir);
    export_trace(r.trace, fs::path(out_dir) / "trace.csv");
    export_summary(r.summary, fs::path(out_dir) / "summary.json");
    if (log_level() >= 1) print_overview(r.summary);
    if (log_level() >= 2) {
        for (const auto& rec : r.summary.timeline) {
            std::cerr << "step " << rec.step << " " << rec.partition << " " << rec.solve_seconds << " s\n";
        }
    }
    if (r.aborted()) {
        const auto& a = *r.summary.abort;
        std::cerr << "collision between " << a.first << " and " << a.second << " at t=" << a.t << "\n";
        return kAbort;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Coalitional-game decision making for connected automated vehicles at a merging zone"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run a closed-loop simulation");
    std::string scenario_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::optional<double> duration;
    std::optional<std::string> formation;
    std::optional<int> threads;
    run->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
    run->add_option("--out-dir", out_dir, "Directory for trace.csv and summary.json");
    run->add_option("--seed", seed, "Override the scenario seed");
    run->add_option("--duration", duration, "Override the duration in seconds")->check(CLI::PositiveNumber);
    run->add_option("--formation", formation, "Formation mode: algorithm, single or grand")
        ->check(CLI::IsMember({"algorithm", "single", "grand"}));
    run->add_option("--threads", threads, "Solver threads within a step")->check(CLI::PositiveNumber);

    auto* validate = app.add_subcommand("validate", "Check a scenario file");
    std::string validate_path;
    validate->add_option("scenario", validate_path, "Scenario JSON file")->required();

    auto* report = app.add_subcommand("report", "Summarize an existing trace");
    std::string trace_path;
    std::string report_scenario;
    std::string report_out;
    report->add_option("trace", trace_path, "Trace CSV file")->required();
    report->add_option("--scenario", report_scenario, "Scenario used for the run (adds geometry and config)");
    report->add_option("--out", report_out, "Write the summary JSON here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*run) return cmd_run(scenario_path, out_dir, seed, duration, formation, threads);
        if (*validate) {
            const Scenario s = load_scenario(validate_path);
            if (log_level() >= 1) std::cout << validate_path << ": ok (" << s.vehicles.size() << " vehicles)\n";
            return kOk;
        }
        if (*report) {
            const Trace t = import_trace(trace_path);
            std::optional<Scenario> s;
            if (!report_scenario.empty()) s = load_scenario(report_scenario);
            const RunSummary sum = summarize_trace(t, s ? &*s : nullptr);
            if (report_out.empty()) {
                std::cout << summary_to_json(sum) << "\n";
            } else {
                export_summary(sum, report_out);
            }
            return kOk;
        }
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return kSchema;
    } catch (const SemanticError& e) {
        std::cerr << "invalid scenario: " << e.what() << "\n";
        return kSchema;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}
