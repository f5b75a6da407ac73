#pragma once

// Trajectory files: one JSON object per line (trajectory.jsonl) plus a JSON
// sidecar header holding the run configuration and model spec. The field
// reference lives in docs/formats.md.

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ngflow/flow.hpp"

namespace ngflow {

inline constexpr int kTrajectoryFormatVersion = 1;
inline constexpr std::string_view kTrajectoryFormatName = "ngflow.trajectory";

/// Single-line JSON encoding of one snapshot.
std::string record_to_json(const StepRecord& rec);
StepRecord record_from_json(std::string_view line);

void write_trajectory_jsonl(std::ostream& out, const Trajectory& trajectory);
std::vector<StepRecord> read_trajectory_jsonl(std::istream& in);

std::string run_config_to_json(const RunConfig& config);
/// Strict parse: unknown keys raise ConfigError; missing keys keep defaults.
RunConfig run_config_from_json(std::string_view text);

std::string model_spec_to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(std::string_view text);

/// Header object with format name, version, run config and model spec.
/// Fields of `extra_object` (a JSON object) are merged in at top level.
std::string trajectory_header_json(const RunConfig& config, const ModelSpec& spec,
                                   std::string_view extra_object = "{}");

}  // namespace ngflow
