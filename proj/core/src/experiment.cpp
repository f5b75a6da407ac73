#include "ngflow/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json_codec.hpp"
#include "ngflow/errors.hpp"
#include "ngflow/reference.hpp"
#include "ngflow/trajectory_io.hpp"

namespace fs = std::filesystem;

namespace ngflow {

using detail::json;

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::toy2d: return "toy2d";
    case ExperimentKind::sparse_classification: return "sparse_classification";
    case ExperimentKind::matrix_completion: return "matrix_completion";
    case ExperimentKind::ntk_panels: return "ntk_panels";
  }
  return "unknown";
}

ExperimentKind experiment_kind_from_string(std::string_view s) {
  for (ExperimentKind k : {ExperimentKind::toy2d, ExperimentKind::sparse_classification,
                           ExperimentKind::matrix_completion, ExperimentKind::ntk_panels})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown experiment '" + std::string(s) + "'");
}

std::string_view to_string(CellStatus s) {
  switch (s) {
    case CellStatus::ok: return "ok";
    case CellStatus::skipped: return "skipped";
    case CellStatus::error: return "error";
  }
  return "unknown";
}

std::size_t ExperimentResult::failed() const {
  return static_cast<std::size_t>(std::count_if(
      cells.begin(), cells.end(), [](const CellOutcome& c) { return c.status == CellStatus::error; }));
}

int ExperimentResult::exit_code() const { return failed() ? 2 : 0; }

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 digest failed");
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i)
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return out.str();
}

namespace {

constexpr int kManifestVersion = 1;

// ---------------------------------------------------------------- config

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &doc;
  std::stringstream path(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(path, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string& p = parts[i];
    const bool last = i + 1 == parts.size();
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(p);
      } catch (const std::exception&) {
        throw ConfigError("override '" + key + "': '" + p + "' is not an array index");
      }
      if (idx >= node->size()) throw ConfigError("override '" + key + "': index out of range");
      node = &(*node)[idx];
    } else {
      if (!node->is_object() && !node->is_null())
        throw ConfigError("override '" + key + "': '" + p + "' descends into a scalar");
      node = &(*node)[p];
    }
    if (last) *node = value;
  }
}

template <typename T>
T get(const json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": missing or wrong type");
  }
}

void parse_toy2d(const json& d, Toy2dParams& p) {
  detail::reject_unknown_keys(
      d, {"n_per_class", "tall_center", "wide_center", "tall_fraction", "jitter"}, "data");
  if (d.contains("n_per_class")) p.n_per_class = get<int>(d, "n_per_class", "data");
  auto vec2 = [&](const char* key, Eigen::Vector2d& out) {
    const auto v = get<std::vector<double>>(d, key, "data");
    if (v.size() != 2) throw ConfigError(std::string("data.") + key + ": expected 2 numbers");
    out = Eigen::Vector2d(v[0], v[1]);
  };
  if (d.contains("tall_center")) vec2("tall_center", p.tall_center);
  if (d.contains("wide_center")) vec2("wide_center", p.wide_center);
  if (d.contains("tall_fraction")) p.tall_fraction = get<double>(d, "tall_fraction", "data");
  if (d.contains("jitter")) p.jitter = get<double>(d, "jitter", "data");
}

void parse_sparse(const json& d, SparseParams& p) {
  detail::reject_unknown_keys(d, {"dim", "sparsity", "n_train", "n_test", "n_population"}, "data");
  if (d.contains("dim")) p.dim = get<int>(d, "dim", "data");
  if (d.contains("sparsity")) p.sparsity = get<int>(d, "sparsity", "data");
  if (d.contains("n_train")) p.n_train = get<int>(d, "n_train", "data");
  if (d.contains("n_test")) p.n_test = get<int>(d, "n_test", "data");
  if (d.contains("n_population")) p.n_population = get<int>(d, "n_population", "data");
}

void parse_completion(const json& d, CompletionParams& p) {
  detail::reject_unknown_keys(d, {"dim", "rank", "n_observed", "noise_sigma"}, "data");
  if (d.contains("dim")) p.dim = get<int>(d, "dim", "data");
  if (d.contains("rank")) p.rank = get<int>(d, "rank", "data");
  if (d.contains("n_observed")) p.n_observed = get<int>(d, "n_observed", "data");
  if (d.contains("noise_sigma")) p.noise_sigma = get<double>(d, "noise_sigma", "data");
}

void parse_ntk(const json& d, NtkPanelParams& p) {
  detail::reject_unknown_keys(d, {"dim", "probe", "depths", "modes", "step_size", "init_scale"},
                              "data");
  if (d.contains("dim")) p.dim = get<int>(d, "dim", "data");
  if (d.contains("probe")) {
    const auto v = get<std::vector<long>>(d, "probe", "data");
    if (v.size() != 2) throw ConfigError("data.probe: expected [row, col]");
    p.probe = {v[0], v[1]};
  }
  if (d.contains("depths")) p.depths = get<std::vector<int>>(d, "depths", "data");
  if (d.contains("modes")) {
    p.modes.clear();
    for (const auto& m : get<std::vector<std::string>>(d, "modes", "data")) {
      try {
        p.modes.push_back(kernel_mode_from_string(m));
      } catch (const ArgumentError& e) {
        throw ConfigError(std::string("data.modes: ") + e.what());
      }
    }
  }
  if (d.contains("step_size")) p.step_size = get<double>(d, "step_size", "data");
  if (d.contains("init_scale")) p.init_scale = get<double>(d, "init_scale", "data");
  if (p.dim < 1 || p.probe.row < 0 || p.probe.col < 0 || p.probe.row >= p.dim ||
      p.probe.col >= p.dim)
    throw ConfigError("data.probe must lie inside a dim x dim matrix");
  if (p.depths.empty() || p.modes.empty()) throw ConfigError("data: depths and modes are required");
  for (int depth : p.depths)
    if (depth < 1) throw ConfigError("data.depths must be >= 1");
  if (!(p.step_size > 0.0) || !(p.init_scale >= 0.0))
    throw ConfigError("data: step_size must be positive and init_scale >= 0");
}

int data_dim(const ExperimentConfig& c) {
  switch (c.experiment) {
    case ExperimentKind::toy2d: return 2;
    case ExperimentKind::sparse_classification: return c.sparse.dim;
    case ExperimentKind::matrix_completion: return c.completion.dim;
    case ExperimentKind::ntk_panels: return c.ntk.dim;
  }
  return 0;
}

json data_json(const ExperimentConfig& c) {
  json d;
  switch (c.experiment) {
    case ExperimentKind::toy2d:
      d["n_per_class"] = c.toy2d.n_per_class;
      d["tall_center"] = {c.toy2d.tall_center(0), c.toy2d.tall_center(1)};
      d["wide_center"] = {c.toy2d.wide_center(0), c.toy2d.wide_center(1)};
      d["tall_fraction"] = c.toy2d.tall_fraction;
      d["jitter"] = c.toy2d.jitter;
      break;
    case ExperimentKind::sparse_classification:
      d["dim"] = c.sparse.dim;
      d["sparsity"] = c.sparse.sparsity;
      d["n_train"] = c.sparse.n_train;
      d["n_test"] = c.sparse.n_test;
      d["n_population"] = c.sparse.n_population;
      break;
    case ExperimentKind::matrix_completion:
      d["dim"] = c.completion.dim;
      d["rank"] = c.completion.rank;
      d["n_observed"] = c.completion.n_observed;
      d["noise_sigma"] = c.completion.noise_sigma;
      break;
    case ExperimentKind::ntk_panels: {
      d["dim"] = c.ntk.dim;
      d["probe"] = {c.ntk.probe.row, c.ntk.probe.col};
      d["depths"] = c.ntk.depths;
      json modes = json::array();
      for (KernelMode m : c.ntk.modes) modes.push_back(to_string(m));
      d["modes"] = modes;
      d["step_size"] = c.ntk.step_size;
      d["init_scale"] = c.ntk.init_scale;
      break;
    }
  }
  return d;
}

json entry_json(const GridEntry& e) {
  json j;
  j["name"] = e.name;
  j["model"] = detail::to_json(e.model);
  j["init_seed"] = e.init_seed ? json(*e.init_seed) : json(nullptr);
  j["collapsed_from"] = e.collapsed_from ? json(*e.collapsed_from) : json(nullptr);
  j["run"] = detail::to_json(e.run);
  return j;
}

// splitmix64 finalizer: decorrelates init streams from data streams.
std::uint64_t derive_seed(std::uint64_t seed) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(std::string_view text,
                                         const std::vector<std::string>& overrides) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  for (const auto& o : overrides) apply_override(doc, o);

  detail::reject_unknown_keys(doc, {"experiment", "output_dir", "seeds", "run", "grid", "data"},
                              "config");
  ExperimentConfig c;
  c.experiment = experiment_kind_from_string(get<std::string>(doc, "experiment", "config"));
  c.output_dir = get<std::string>(doc, "output_dir", "config");
  c.seeds = get<std::vector<std::uint64_t>>(doc, "seeds", "config");
  if (c.seeds.empty()) throw ConfigError("config.seeds must not be empty");
  if (std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() != c.seeds.size())
    throw ConfigError("config.seeds must be distinct");

  const json data = doc.contains("data") ? doc["data"] : json::object();
  try {
    switch (c.experiment) {
      case ExperimentKind::toy2d: parse_toy2d(data, c.toy2d); c.toy2d.validate(); break;
      case ExperimentKind::sparse_classification:
        parse_sparse(data, c.sparse);
        c.sparse.validate();
        break;
      case ExperimentKind::matrix_completion:
        parse_completion(data, c.completion);
        c.completion.validate();
        break;
      case ExperimentKind::ntk_panels: parse_ntk(data, c.ntk); break;
    }
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("data: ") + e.what());
  }

  RunConfig base;
  base.objective = c.experiment == ExperimentKind::matrix_completion ? Objective::completion
                                                                     : Objective::logistic;
  if (doc.contains("run")) detail::apply_run_config(doc["run"], base, "run");

  if (c.experiment != ExperimentKind::ntk_panels) {
    if (!doc.contains("grid") || !doc["grid"].is_array() || doc["grid"].empty())
      throw ConfigError("config.grid must be a non-empty array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < doc["grid"].size(); ++i) {
      const json& g = doc["grid"][i];
      const std::string where = "grid[" + std::to_string(i) + "]";
      detail::reject_unknown_keys(g, {"name", "model", "run", "collapsed_from"}, where);
      GridEntry e;
      e.name = get<std::string>(g, "name", where);
      if (e.name.empty() || e.name.find_first_of("/\\ ,") != std::string::npos)
        throw ConfigError(where + ".name must be non-empty without '/', '\\', ' ' or ','");
      if (!names.insert(e.name).second) throw ConfigError(where + ".name is duplicated");
      if (!g.contains("model")) throw ConfigError(where + ".model is required");
      const json& m = g["model"];
      detail::apply_model_spec(m, e.model, where + ".model");
      if (m.contains("seed")) e.init_seed = e.model.seed;
      if (m.contains("dim") && e.model.dim != data_dim(c))
        throw ConfigError(where + ".model.dim disagrees with the data dimension");
      e.model.dim = data_dim(c);
      e.run = base;
      if (g.contains("run")) detail::apply_run_config(g["run"], e.run, where + ".run");
      if (g.contains("collapsed_from")) {
        if (c.experiment != ExperimentKind::matrix_completion)
          throw ConfigError(where + ".collapsed_from applies to matrix_completion only");
        e.collapsed_from = get<int>(g, "collapsed_from", where);
        if (*e.collapsed_from < e.model.depth)
          throw ConfigError(where + ".collapsed_from must be >= model.depth");
      }
      try {
        e.model.validate();
        e.run.validate();
      } catch (const ArgumentError& err) {
        throw ConfigError(where + ": " + err.what());
      }
      const bool wants_matrix = c.experiment == ExperimentKind::matrix_completion;
      if (wants_matrix != (e.model.kind == ModelKind::matfac))
        throw ConfigError(where + ".model.kind does not fit the experiment");
      const Objective expected = wants_matrix ? Objective::completion : Objective::logistic;
      if (e.run.objective != expected)
        throw ConfigError(where + ".run.objective does not fit the experiment");
      c.grid.push_back(std::move(e));
    }
  } else if (doc.contains("grid")) {
    throw ConfigError("ntk_panels configs take depths and modes from data, not a grid");
  }

  json canon;
  canon["experiment"] = to_string(c.experiment);
  canon["output_dir"] = c.output_dir.generic_string();
  canon["seeds"] = c.seeds;
  canon["data"] = data_json(c);
  canon["grid"] = json::array();
  for (const auto& e : c.grid) canon["grid"].push_back(entry_json(e));
  c.canonical = canon.dump();
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path,
                                        const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), overrides);
}

namespace {

// ---------------------------------------------------------------- files

void write_atomic(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Lists every regular file under `dir` (relative, sorted) with size and hash,
// then adds the manifest itself, which cannot carry its own hash.
json file_listing(const fs::path& dir) {
  std::vector<std::string> paths;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file()) {
      const std::string rel = fs::relative(entry.path(), dir).generic_string();
      if (rel == "manifest.json" || (rel.size() >= 4 && rel.substr(rel.size() - 4) == ".tmp"))
        continue;
      paths.push_back(rel);
    }
  std::sort(paths.begin(), paths.end());
  json files = json::array();
  for (const auto& rel : paths) {
    const std::string content = read_file(dir / rel);
    files.push_back({{"path", rel}, {"bytes", content.size()}, {"sha256", sha256_hex(content)}});
  }
  files.push_back({{"path", "manifest.json"}, {"bytes", nullptr}, {"sha256", nullptr}});
  return files;
}

void write_manifest(const ExperimentConfig& config, const std::string& config_hash,
                    const json& cells, const std::string& kind) {
  json m;
  m["format"] = "ngflow.manifest";
  m["version"] = kManifestVersion;
  m["kind"] = kind;
  m["experiment"] = to_string(config.experiment);
  m["config_hash"] = config_hash;
  m["config"] = json::parse(config.canonical);
  m["cells"] = cells;
  m["files"] = file_listing(config.output_dir);
  write_atomic(config.output_dir / "manifest.json", m.dump(2) + "\n");
}

// ---------------------------------------------------------------- cells

struct CellPlan {
  const GridEntry* entry = nullptr;
  std::uint64_t seed = 0;
  std::string id;
  std::string hash;
  json hash_input;
};

json dataset_json(const ClassificationDataset& ds) {
  return {{"X", detail::matrix_to_json(ds.X)}, {"y", detail::matrix_to_json(ds.y)}};
}

ClassificationProblem classification_problem(const ExperimentConfig& config, std::uint64_t seed) {
  ClassificationProblem problem;
  if (config.experiment == ExperimentKind::toy2d) {
    problem.train = gen_toy2d(config.toy2d, seed);
    problem.references["ols"] = ols(problem.train).beta;
    problem.references["l2_margin"] = max_margin_l2(problem.train).beta;
    problem.references["l1_margin"] = max_margin_lp(problem.train, 1.0).beta;
    problem.references["lhalf_margin"] = max_margin_lp(problem.train, 0.5).beta;
  } else {
    SparseSplits splits = gen_sparse(config.sparse, seed);
    problem.train = std::move(splits.train);
    problem.test = std::move(splits.test);
    problem.population = std::move(splits.population);
    problem.references["ols"] = ols(problem.train).beta;
    problem.references["ground_truth"] = splits.ground_truth;
    problem.references["l2_margin"] = max_margin_l2(problem.train).beta;
  }
  return problem;
}

ModelSpec cell_model(const CellPlan& plan) {
  ModelSpec spec = plan.entry->model;
  spec.seed = plan.entry->init_seed ? *plan.entry->init_seed : derive_seed(plan.seed);
  return spec;
}

std::map<std::string, double> final_values(const Trajectory& traj) {
  std::map<std::string, double> out;
  const StepRecord& last = traj.records.back();
  out["steps"] = static_cast<double>(last.step);
  out["t"] = last.t;
  out["loss"] = last.loss;
  for (const auto& [k, v] : last.metrics) out[k] = v;
  return out;
}

CellOutcome execute_cell(const ExperimentConfig& config, const CellPlan& plan) {
  CellOutcome outcome;
  outcome.id = plan.id;
  outcome.name = plan.entry->name;
  outcome.seed = plan.seed;
  outcome.cell_hash = plan.hash;
  const fs::path dir = config.output_dir / "cells" / plan.id;
  const ModelSpec spec = cell_model(plan);

  json header_extra;
  header_extra["cell_id"] = plan.id;
  header_extra["name"] = plan.entry->name;
  header_extra["seed"] = plan.seed;
  header_extra["cell_hash"] = plan.hash;
  header_extra["experiment"] = to_string(config.experiment);
  header_extra["data"] = data_json(config);
  header_extra["collapsed_from"] =
      plan.entry->collapsed_from ? json(*plan.entry->collapsed_from) : json(nullptr);

  Trajectory traj;
  bool have_traj = false;
  try {
    if (config.experiment == ExperimentKind::matrix_completion) {
      const CompletionTask task = gen_completion(config.completion, plan.seed);
      ModelParams params;
      if (plan.entry->collapsed_from) {
        ModelSpec deep = spec;
        deep.depth = *plan.entry->collapsed_from;
        params = collapsed_init(deep, spec.depth);
      } else {
        params = init(spec);
      }
      traj = run(task, params, plan.entry->run);
    } else {
      const ClassificationProblem problem = classification_problem(config, plan.seed);
      traj = run(problem, init(spec), plan.entry->run);
    }
    have_traj = true;
    if (traj.status == RunStatus::aborted) {
      outcome.status = CellStatus::error;
      outcome.error = traj.diagnostic;
      outcome.error_step = traj.records.back().step;
    }
  } catch (const SolverError& e) {
    outcome.status = CellStatus::error;
    outcome.error = e.what();
    outcome.error_step = e.step();
  } catch (const std::exception& e) {
    outcome.status = CellStatus::error;
    outcome.error = e.what();
  }

  if (have_traj) {
    std::ostringstream lines;
    write_trajectory_jsonl(lines, traj);
    write_atomic(dir / "trajectory.jsonl", lines.str());
    outcome.final_values = final_values(traj);
    json fin = json::object();
    for (const auto& [k, v] : outcome.final_values) fin[k] = detail::number(v);
    header_extra["final"] = fin;
    header_extra["run_status"] = to_string(traj.status);
    header_extra["diagnostic"] = traj.diagnostic;
    header_extra["final_hypothesis"] = detail::matrix_to_json(traj.final_hypothesis);
  }
  header_extra["status"] = to_string(outcome.status);
  header_extra["error"] = outcome.error;
  header_extra["error_step"] = outcome.error_step ? json(*outcome.error_step) : json(nullptr);
  // header last: its presence with status ok marks the cell complete
  write_atomic(dir / "header.json",
               trajectory_header_json(plan.entry->run, spec, header_extra.dump()) + "\n");
  return outcome;
}

std::optional<CellOutcome> completed_cell(const ExperimentConfig& config, const CellPlan& plan) {
  const fs::path dir = config.output_dir / "cells" / plan.id;
  if (!fs::exists(dir / "header.json") || !fs::exists(dir / "trajectory.jsonl")) return std::nullopt;
  json h;
  try {
    h = json::parse(read_file(dir / "header.json"));
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (h.value("cell_hash", "") != plan.hash || h.value("status", "") != "ok") return std::nullopt;
  CellOutcome outcome;
  outcome.id = plan.id;
  outcome.name = plan.entry->name;
  outcome.seed = plan.seed;
  outcome.cell_hash = plan.hash;
  outcome.status = CellStatus::skipped;
  for (const auto& item : h.at("final").items())
    outcome.final_values[item.key()] = detail::number_from_json(item.value());
  return outcome;
}

std::string summary_csv(const std::vector<CellOutcome>& cells) {
  std::set<std::string> columns;
  for (const auto& c : cells)
    for (const auto& kv : c.final_values) columns.insert(kv.first);
  std::ostringstream out;
  out << "cell_id,name,seed,status";
  for (const auto& col : columns) out << ',' << col;
  out << '\n';
  for (const auto& c : cells) {
    // a skipped cell reports the same row as when it was computed
    const std::string_view status = c.status == CellStatus::error ? "error" : "ok";
    out << c.id << ',' << c.name << ',' << c.seed << ',' << status;
    for (const auto& col : columns) {
      out << ',';
      const auto it = c.final_values.find(col);
      if (it != c.final_values.end()) out << fmt(it->second);
    }
    out << '\n';
  }
  return out.str();
}

json cells_json(const std::vector<CellOutcome>& cells) {
  json arr = json::array();
  for (const auto& c : cells) {
    json j;
    j["id"] = c.id;
    j["name"] = c.name;
    j["seed"] = c.seed;
    j["cell_hash"] = c.cell_hash;
    j["status"] = c.status == CellStatus::error ? "error" : "ok";
    j["error"] = c.error;
    j["error_step"] = c.error_step ? json(*c.error_step) : json(nullptr);
    if (c.status != CellStatus::error) {
      j["trajectory"] = "cells/" + c.id + "/trajectory.jsonl";
      j["header"] = "cells/" + c.id + "/header.json";
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

template <typename Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(jobs, count));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) fn(i);
  };
  if (workers == 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  if (config.experiment == ExperimentKind::ntk_panels) return probe_ntk(config);
  if (options.jobs < 1) throw ArgumentError("jobs must be >= 1");
  fs::create_directories(config.output_dir);

  ExperimentResult result;
  result.config_hash = sha256_hex(config.canonical);

  std::vector<CellPlan> plans;
  for (const auto& entry : config.grid)
    for (std::uint64_t seed : config.seeds) {
      CellPlan p;
      p.entry = &entry;
      p.seed = seed;
      p.id = entry.name + "__s" + std::to_string(seed);
      p.hash_input["trajectory_format"] = kTrajectoryFormatVersion;
      p.hash_input["experiment"] = to_string(config.experiment);
      p.hash_input["data"] = data_json(config);
      p.hash_input["entry"] = entry_json(entry);
      p.hash_input["seed"] = seed;
      p.hash = sha256_hex(p.hash_input.dump());
      plans.push_back(std::move(p));
    }

  result.cells.resize(plans.size());
  parallel_for(plans.size(), options.jobs, [&](std::size_t i) {
    if (!options.force) {
      if (auto done = completed_cell(config, plans[i])) {
        result.cells[i] = std::move(*done);
        return;
      }
    }
    result.cells[i] = execute_cell(config, plans[i]);
  });

  write_atomic(config.output_dir / "summary.csv", summary_csv(result.cells));
  write_manifest(config, result.config_hash, cells_json(result.cells), "experiment");
  return result;
}

void generate_data(const ExperimentConfig& config) {
  fs::create_directories(config.output_dir);
  for (std::uint64_t seed : config.seeds) {
    json d;
    d["format"] = "ngflow.data";
    d["version"] = kManifestVersion;
    d["experiment"] = to_string(config.experiment);
    d["seed"] = seed;
    switch (config.experiment) {
      case ExperimentKind::toy2d: d["train"] = dataset_json(gen_toy2d(config.toy2d, seed)); break;
      case ExperimentKind::sparse_classification: {
        const SparseSplits s = gen_sparse(config.sparse, seed);
        d["train"] = dataset_json(s.train);
        d["test"] = dataset_json(s.test);
        d["population"] = dataset_json(s.population);
        d["ground_truth"] = detail::matrix_to_json(s.ground_truth);
        break;
      }
      case ExperimentKind::matrix_completion: {
        const CompletionTask t = gen_completion(config.completion, seed);
        d["target"] = detail::matrix_to_json(t.target);
        d["mask"] = detail::matrix_to_json(t.mask.cast<double>());
        d["noise_sigma"] = t.noise_sigma;
        break;
      }
      case ExperimentKind::ntk_panels:
        throw ConfigError("ntk_panels has no dataset to generate");
    }
    write_atomic(config.output_dir / "data" / ("seed_" + std::to_string(seed) + ".json"),
                 d.dump() + "\n");
  }
  write_manifest(config, sha256_hex(config.canonical), json::array(), "data");
}

ExperimentResult probe_ntk(const ExperimentConfig& config) {
  const NtkPanelParams& p = config.ntk;
  fs::create_directories(config.output_dir);
  ExperimentResult result;
  result.config_hash = sha256_hex(config.canonical);

  json panels = json::array();
  for (std::uint64_t seed : config.seeds)
    for (int depth : p.depths) {
      ModelSpec spec;
      spec.kind = ModelKind::matfac;
      spec.dim = p.dim;
      spec.depth = depth;
      spec.init_scale = p.init_scale;
      spec.seed = derive_seed(seed);
      const ModelParams params = init(spec);
      for (KernelMode mode : p.modes) {
        CellOutcome cell;
        cell.name = std::string(to_string(mode)) + "_L" + std::to_string(depth);
        cell.id = cell.name + "__s" + std::to_string(seed);
        cell.seed = seed;
        json panel;
        panel["mode"] = to_string(mode);
        panel["depth"] = depth;
        panel["seed"] = seed;
        try {
          const KernelSlice slice = kernel_slice(params, p.probe, mode, p.step_size);
          panel["status"] = "ok";
          panel["rank_deficient"] = slice.rank_deficient;
          panel["condition"] = detail::number(slice.condition);
          panel["response"] = detail::matrix_to_json(slice.response);
          Eigen::MatrixXd off = slice.response;
          off(p.probe.row, p.probe.col) = 0.0;
          cell.final_values["probe_response"] = slice.response(p.probe.row, p.probe.col);
          cell.final_values["off_probe_abs_max"] = off.cwiseAbs().maxCoeff();
        } catch (const std::exception& e) {
          cell.status = CellStatus::error;
          cell.error = e.what();
          panel["status"] = "error";
          panel["error"] = e.what();
        }
        panels.push_back(std::move(panel));
        result.cells.push_back(std::move(cell));
      }
    }

  json out;
  out["format"] = "ngflow.ntk_panels";
  out["version"] = kManifestVersion;
  out["dim"] = p.dim;
  out["probe"] = {p.probe.row, p.probe.col};
  out["step_size"] = p.step_size;
  out["init_scale"] = p.init_scale;
  out["panels"] = panels;
  write_atomic(config.output_dir / "ntk_panels.json", out.dump() + "\n");
  write_atomic(config.output_dir / "summary.csv", summary_csv(result.cells));
  write_manifest(config, result.config_hash, cells_json(result.cells), "ntk_panels");
  return result;
}

std::string report(const fs::path& output_dir) {
  const fs::path csv = output_dir / "summary.csv";
  if (!fs::exists(csv)) throw Error("no summary.csv in " + output_dir.string());
  std::istringstream in(read_file(csv));
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) header.push_back(f);
  }
  struct Group {
    int cells = 0;
    int errors = 0;
    std::map<std::string, std::vector<double>> values;
  };
  std::map<std::string, Group> groups;
  std::vector<std::string> order;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    fields.resize(header.size());
    const std::string& name = fields[1];
    if (!groups.count(name)) order.push_back(name);
    Group& g = groups[name];
    ++g.cells;
    if (fields[3] == "error") ++g.errors;
    for (std::size_t k = 4; k < header.size(); ++k)
      if (!fields[k].empty()) g.values[header[k]].push_back(std::stod(fields[k]));
  }

  std::ostringstream out;
  out << std::setprecision(6);
  for (const auto& name : order) {
    const Group& g = groups[name];
    out << name << "  (" << g.cells << " cells, " << g.errors << " errors)\n";
    for (const auto& [metric, vs] : g.values) {
      double mean = 0.0;
      for (double v : vs) mean += v;
      mean /= static_cast<double>(vs.size());
      double var = 0.0;
      for (double v : vs) var += (v - mean) * (v - mean);
      const double sd = vs.size() > 1 ? std::sqrt(var / static_cast<double>(vs.size() - 1)) : 0.0;
      out << "  " << std::left << std::setw(22) << metric << std::right << std::setw(14) << mean
          << " +/- " << sd << '\n';
    }
  }
  return out.str();
}

}  // namespace ngflow
