#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cavgame/coalition_engine.hpp"
#include "cavgame/optimizer.hpp"

namespace cavgame {

enum class FormationMode { Algorithm, Single, Grand };

std::string_view formation_mode_name(FormationMode m);
FormationMode formation_mode_from_name(std::string_view s);

struct FormationConfig {
    FormationMode mode = FormationMode::Algorithm;
    double gap_threshold = 15.0;  // m, sub-coalition chaining distance
    double tolerance = 1e-6;      // slack on rationality and merge comparisons
};

struct VehicleSpec {
    VehicleId id;
    bool player = true;
    int lane = 1;
    double X = 0.0;
    double Y = 0.0;
    double vx = 20.0;
    DrivingProfile profile;
};

struct Scenario {
    std::string name;
    std::string description;
    std::uint64_t seed = 1;
    double duration = 12.0;
    PlannerConfig planner;
    FormationConfig formation;
    std::vector<VehicleSpec> vehicles;

    int steps() const;
};

// SchemaError for malformed JSON, wrong types or unknown fields;
// SemanticError for inconsistent content.
Scenario parse_scenario(std::string_view json_text);
Scenario load_scenario(const std::filesystem::path& path);

// Checks cross-field consistency; called by the loaders.
void validate_scenario(const Scenario& s);

// Fully resolved configuration as JSON with stable key order.
std::string scenario_to_json(const Scenario& s, int indent = 2);

}  // namespace cavgame
