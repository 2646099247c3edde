#pragma once

#include <json.hpp>

#include "cavgame/scenario.hpp"

namespace cavgame::detail {

nlohmann::ordered_json scenario_echo(const Scenario& s);

}  // namespace cavgame::detail
