#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "cavgame/simulation.hpp"

namespace cavgame {

// Fixed CSV column order of exported traces.
inline constexpr const char* kTraceHeader =
    "t,vehicle_id,X,Y,vx,vy,phi,r,ax,delta_f,beta,lane,coalition_id,J_s,J_c,J_e,J_total";

void write_trace_csv(const Trace& trace, std::ostream& os);
std::string trace_to_csv(const Trace& trace);
// Throws IoError naming the path.
void export_trace(const Trace& trace, const std::filesystem::path& path);

// Parses a CSV produced by write_trace_csv. Columns outside the CSV (lambda and
// the raw sub-terms) are left at zero. Throws IoError or SchemaError.
Trace read_trace_csv(std::istream& is, const std::string& source = "<stream>");
Trace import_trace(const std::filesystem::path& path);

std::string summary_to_json(const RunSummary& summary, int indent = 2);
void export_summary(const RunSummary& summary, const std::filesystem::path& path);

}  // namespace cavgame
