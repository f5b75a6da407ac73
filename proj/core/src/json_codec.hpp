#pragma once

// JSON encodings shared by the trajectory writer and the experiment runner.
// Private to the library: nlohmann types never appear in installed headers.

#include <set>
#include <string>

#include <json.hpp>

#include "ngflow/flow.hpp"
#include "ngflow/model.hpp"

namespace ngflow::detail {

using json = nlohmann::json;

/// Throws ConfigError naming the first key of `obj` outside `allowed`.
void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where);

json to_json(const RunConfig& config);
json to_json(const ModelSpec& spec);
json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const json& j);

/// Overwrites the fields present in `obj`; unknown keys are errors.
void apply_run_config(const json& obj, RunConfig& config, const std::string& where);
void apply_model_spec(const json& obj, ModelSpec& spec, const std::string& where);

json record_to_json_value(const StepRecord& rec);

/// Non-finite doubles become null so the output stays valid JSON.
json number(double v);
double number_from_json(const json& j);

}  // namespace ngflow::detail
