#pragma once

// File formats and machine-readable reports: CSV trajectories (header
// "k,u1,...,um,y1,...,yp"), JSON state-space models (schema "ssmodel/1"),
// JSON analysis reports (schema "report/1" with a fixed key order), and
// plot emission (two-column CSV plus a self-contained SVG line chart).
// Every floating-point number is serialized with 17 significant digits, so
// save/load roundtrips reproduce each double bit-exactly.

#include <string>
#include <vector>

#include "ddiqc/lti.hpp"
#include "json.hpp"

namespace ddiqc::io {

using Json = nlohmann::ordered_json;

// --- trajectories (CSV) ---

// Parse errors name the 1-based line: malformed header, non-consecutive
// sample index, wrong cell count, and non-numeric / non-finite cells are
// reported as distinct ErrorKind::Io messages.
lti::Trajectory parse_trajectory_csv(const std::string& text,
                                     const std::string& source = "<string>");
std::string format_trajectory_csv(const lti::Trajectory& traj);

lti::Trajectory load_trajectory_csv(const std::string& path);
void save_trajectory_csv(const std::string& path, const lti::Trajectory& traj);

// --- models (JSON, schema "ssmodel/1") ---

lti::StateSpaceModel parse_model_json(const std::string& text,
                                      const std::string& source = "<string>");
std::string format_model_json(const lti::StateSpaceModel& model);

lti::StateSpaceModel load_model_json(const std::string& path);
void save_model_json(const std::string& path, const lti::StateSpaceModel& model);

// --- reports (JSON, schema "report/1") ---

// An assembled analysis report. The command layer fills `root` with the
// fixed key order (schema, tool_version, command, argv, config, pe,
// result, timing_seconds); absent estimates are nulls.
struct ReportDocument {
    Json root;
};

// Serialize with 17-significant-digit numbers and keys in insertion order.
// Non-finite numbers violate the document invariant (ErrorKind::Argument).
std::string report_json(const ReportDocument& doc);

// The underlying dump shared by reports and model files: compact JSON, one
// trailing newline, floats via printf "%.17g".
std::string dump_json(const Json& value);

// Nested row-major arrays <-> Eigen. `what` names the field in errors.
Json matrix_to_json(const Eigen::MatrixXd& M);
Eigen::MatrixXd matrix_from_json(const Json& value, const std::string& what);

// --- plot emission (data-only) ---

// CSV with a labeled two-column header, one (x, y) pair per row.
void write_plot_csv(const std::string& path, const std::string& x_label,
                    const std::string& y_label, const std::vector<double>& x,
                    const std::vector<double>& y);

// Minimal standalone SVG line chart of the same pairs.
void write_plot_svg(const std::string& path, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<double>& x, const std::vector<double>& y);

// Read a whole file (ErrorKind::Io on failure) / write one atomically-ish
// (truncate + write + flush, ErrorKind::Io on failure).
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace ddiqc::io
