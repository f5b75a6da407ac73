#include "ngflow/trajectory_io.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include "json_codec.hpp"
#include "ngflow/errors.hpp"

namespace ngflow {

namespace detail {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& item : obj.items())
    if (!allowed.count(item.key())) throw ConfigError(where + ": unknown key '" + item.key() + "'");
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from_json(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

json to_json(const RunConfig& c) {
  json j;
  j["optimizer"] = to_string(c.optimizer);
  j["objective"] = to_string(c.objective);
  j["step_size"] = c.step_size;
  j["max_steps"] = c.max_steps;
  j["record_every"] = c.record_every;
  j["fisher_weighting"] = to_string(c.fisher_weighting);
  j["loss_below"] = c.loss_below ? json(*c.loss_below) : json(nullptr);
  j["loss_reduction"] = to_string(c.loss_reduction);
  j["matfac_solver"] = to_string(c.matfac_solver);
  j["diagonal_solve"] = to_string(c.diagonal_solve);
  j["pinv_rtol"] = c.pinv_rtol;
  j["residual_tol"] = c.residual_tol;
  return j;
}

json to_json(const ModelSpec& s) {
  json j;
  j["kind"] = to_string(s.kind);
  j["depth"] = s.depth;
  j["dim"] = s.dim;
  j["init_scale"] = s.init_scale;
  j["seed"] = s.seed;
  return j;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  if (m.cols() == 1) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(number(m(i, 0)));
    return out;
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(number(m(i, j)));
    out.push_back(std::move(row));
  }
  return out;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("matrix: expected an array");
  if (j.empty()) return {};
  if (!j.front().is_array()) {
    Eigen::MatrixXd m(j.size(), 1);
    for (std::size_t i = 0; i < j.size(); ++i) m(i, 0) = number_from_json(j[i]);
    return m;
  }
  const std::size_t cols = j.front().size();
  Eigen::MatrixXd m(j.size(), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) throw ConfigError("matrix: ragged rows");
    for (std::size_t k = 0; k < cols; ++k) m(i, k) = number_from_json(j[i][k]);
  }
  return m;
}

namespace {

template <typename T>
T get_as(const json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

template <typename F>
auto wrap(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const ArgumentError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace

void apply_run_config(const json& obj, RunConfig& c, const std::string& where) {
  reject_unknown_keys(obj,
                      {"optimizer", "objective", "step_size", "max_steps", "record_every",
                       "fisher_weighting", "loss_below", "loss_reduction", "matfac_solver",
                       "diagonal_solve", "pinv_rtol", "residual_tol"},
                      where);
  auto str = [&](const char* key) { return get_as<std::string>(obj, key, where); };
  wrap(where, [&] {
    if (obj.contains("optimizer")) c.optimizer = optimizer_from_string(str("optimizer"));
    if (obj.contains("objective")) c.objective = objective_from_string(str("objective"));
    if (obj.contains("fisher_weighting"))
      c.fisher_weighting = fisher_weighting_from_string(str("fisher_weighting"));
    if (obj.contains("loss_reduction"))
      c.loss_reduction = loss_reduction_from_string(str("loss_reduction"));
    if (obj.contains("matfac_solver"))
      c.matfac_solver = matfac_solver_from_string(str("matfac_solver"));
    if (obj.contains("diagonal_solve"))
      c.diagonal_solve = diagonal_solve_from_string(str("diagonal_solve"));
    return 0;
  });
  if (obj.contains("step_size")) c.step_size = get_as<double>(obj, "step_size", where);
  if (obj.contains("max_steps")) c.max_steps = get_as<std::int64_t>(obj, "max_steps", where);
  if (obj.contains("record_every"))
    c.record_every = get_as<std::int64_t>(obj, "record_every", where);
  if (obj.contains("loss_below")) {
    if (obj.at("loss_below").is_null())
      c.loss_below.reset();
    else
      c.loss_below = get_as<double>(obj, "loss_below", where);
  }
  if (obj.contains("pinv_rtol")) c.pinv_rtol = get_as<double>(obj, "pinv_rtol", where);
  if (obj.contains("residual_tol")) c.residual_tol = get_as<double>(obj, "residual_tol", where);
}

void apply_model_spec(const json& obj, ModelSpec& s, const std::string& where) {
  reject_unknown_keys(obj, {"kind", "depth", "dim", "init_scale", "seed"}, where);
  if (obj.contains("kind"))
    s.kind = wrap(where, [&] { return model_kind_from_string(get_as<std::string>(obj, "kind", where)); });
  if (obj.contains("depth")) s.depth = get_as<int>(obj, "depth", where);
  if (obj.contains("dim")) s.dim = get_as<int>(obj, "dim", where);
  if (obj.contains("init_scale")) s.init_scale = get_as<double>(obj, "init_scale", where);
  if (obj.contains("seed")) s.seed = get_as<std::uint64_t>(obj, "seed", where);
}

json record_to_json_value(const StepRecord& rec) {
  json j;
  j["step"] = rec.step;
  j["t"] = number(rec.t);
  j["loss"] = number(rec.loss);
  json metrics = json::object();
  for (const auto& [k, v] : rec.metrics) metrics[k] = number(v);
  j["metrics"] = std::move(metrics);
  if (rec.hypothesis) j["hypothesis"] = matrix_to_json(*rec.hypothesis);
  if (rec.logits.size()) j["logits"] = matrix_to_json(rec.logits);
  return j;
}

}  // namespace detail

using detail::json;

std::string record_to_json(const StepRecord& rec) { return detail::record_to_json_value(rec).dump(); }

StepRecord record_from_json(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("trajectory record: ") + e.what());
  }
  detail::reject_unknown_keys(j, {"step", "t", "loss", "metrics", "hypothesis", "logits"},
                              "trajectory record");
  StepRecord rec;
  rec.step = j.at("step").get<std::int64_t>();
  rec.t = detail::number_from_json(j.at("t"));
  rec.loss = detail::number_from_json(j.at("loss"));
  for (const auto& item : j.at("metrics").items())
    rec.metrics[item.key()] = detail::number_from_json(item.value());
  if (j.contains("hypothesis")) rec.hypothesis = detail::matrix_from_json(j["hypothesis"]);
  if (j.contains("logits")) rec.logits = detail::matrix_from_json(j["logits"]).col(0);
  return rec;
}

void write_trajectory_jsonl(std::ostream& out, const Trajectory& trajectory) {
  for (const auto& rec : trajectory.records) out << record_to_json(rec) << '\n';
}

std::vector<StepRecord> read_trajectory_jsonl(std::istream& in) {
  std::vector<StepRecord> records;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) records.push_back(record_from_json(line));
  return records;
}

std::string run_config_to_json(const RunConfig& config) { return detail::to_json(config).dump(); }

RunConfig run_config_from_json(std::string_view text) {
  RunConfig c;
  try {
    detail::apply_run_config(json::parse(text), c, "run");
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  return c;
}

std::string model_spec_to_json(const ModelSpec& spec) { return detail::to_json(spec).dump(); }

ModelSpec model_spec_from_json(std::string_view text) {
  ModelSpec s;
  try {
    detail::apply_model_spec(json::parse(text), s, "model");
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("model spec: ") + e.what());
  }
  return s;
}

std::string trajectory_header_json(const RunConfig& config, const ModelSpec& spec,
                                   std::string_view extra_object) {
  json h;
  h["format"] = kTrajectoryFormatName;
  h["version"] = kTrajectoryFormatVersion;
  h["run"] = detail::to_json(config);
  h["model"] = detail::to_json(spec);
  const json extra = json::parse(extra_object);
  if (!extra.is_object()) throw ArgumentError("header extras must be a JSON object");
  for (const auto& item : extra.items()) h[item.key()] = item.value();
  return h.dump(2);
}

}  // namespace ngflow
