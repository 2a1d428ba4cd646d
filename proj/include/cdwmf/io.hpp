#pragma once

#include <optional>
#include <string>

#include "json.hpp"

#include "cdwmf/luttinger.hpp"
#include "cdwmf/phase.hpp"
#include "cdwmf/ttpv.hpp"

namespace cdwmf {

using json = nlohmann::json;

/// Frozen per schema version: CSV column sets and JSON field names.
inline constexpr const char* schema_version = "cdwmf-1";

std::string code_version();

/// Writes to a temporary sibling and renames it over `path`.
void write_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

/// {"schema_version", "code_version", "config"}. Grid sizes are part of config.
json provenance(const json& config);

json to_json(const TtpvParams& p);
json to_json(const LuttParams& p);
json to_json(const VariationalAnsatz& a);
json to_json(const MfSolution& s);
json to_json(const LuttSolution& s);
json to_json(const BranchPoint& p);
json to_json(const Crossing& c);
json to_json(const BoundarySet& b);
json to_json(const ColumnResult& c);
json to_json(const PhaseDiagram& d);
json to_json(const FixQResult& r);

BranchPoint branch_point_from_json(const json& j);
Crossing crossing_from_json(const json& j);
BoundarySet boundaries_from_json(const json& j);
ColumnResult column_from_json(const json& j);

/// Column persistence used by resumable sweeps. read_column returns nothing
/// when the file is missing, unreadable, or was written for another config.
void write_column(const std::string& path, const ColumnResult& c, const std::string& provenance);
std::optional<ColumnResult> read_column(const std::string& path, const std::string& provenance,
                                        double axis_value);

/// Scan table with '#' provenance lines followed by a header row.
std::string scan_to_csv(const MuScan& scan, const json& prov);
/// One row per nu cell of a column.
std::string column_to_csv(const ColumnResult& c, const std::vector<double>& nu, const json& prov);

/// SVG of a phase diagram, computed from its JSON alone.
std::string render_svg(const json& diagram);

PhaseLabel label_from_string(const std::string& s);

}  // namespace cdwmf
