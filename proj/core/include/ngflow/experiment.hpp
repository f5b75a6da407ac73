#pragma once

// Experiment configuration, grid execution and result persistence.
//
// A config is a JSON document (schema in docs/config.md). Each (grid entry,
// seed) pair is a cell; cells run in parallel and write
//   <output>/cells/<id>/trajectory.jsonl
//   <output>/cells/<id>/header.json
// followed by <output>/summary.csv and <output>/manifest.json.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ngflow/flow.hpp"
#include "ngflow/generators.hpp"
#include "ngflow/model.hpp"
#include "ngflow/ntk.hpp"

namespace ngflow {

enum class ExperimentKind { toy2d, sparse_classification, matrix_completion, ntk_panels };

std::string_view to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(std::string_view s);

struct GridEntry {
  std::string name;
  ModelSpec model;
  /// Unset: the init seed is derived from the cell's data seed.
  std::optional<std::uint64_t> init_seed;
  /// Completion only: draw this many factors and multiply them down to
  /// model.depth.
  std::optional<int> collapsed_from;
  RunConfig run;
};

struct NtkPanelParams {
  int dim = 11;
  Probe probe{5, 5};
  std::vector<int> depths{1, 2, 3, 4};
  std::vector<KernelMode> modes{KernelMode::egf_ntk, KernelMode::egd_onestep, KernelMode::ngf_ntk,
                                KernelMode::ngd_onestep};
  double step_size = 1e-3;
  double init_scale = 0.5;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::toy2d;
  std::filesystem::path output_dir;
  std::vector<std::uint64_t> seeds;
  std::vector<GridEntry> grid;
  Toy2dParams toy2d;
  SparseParams sparse;
  CompletionParams completion;
  NtkPanelParams ntk;
  /// Normalized JSON of the whole config after overrides; hashed into the
  /// manifest.
  std::string canonical;

  /// Strict parse. `overrides` are "dotted.key=value" strings applied to the
  /// document before validation; value is read as JSON, falling back to a
  /// plain string.
  static ExperimentConfig parse(std::string_view text,
                                const std::vector<std::string>& overrides = {});
  static ExperimentConfig load(const std::filesystem::path& path,
                               const std::vector<std::string>& overrides = {});
};

struct RunOptions {
  bool force = false;
  int jobs = 1;
};

enum class CellStatus { ok, skipped, error };
std::string_view to_string(CellStatus s);

struct CellOutcome {
  std::string id;
  std::string name;
  std::uint64_t seed = 0;
  std::string cell_hash;
  CellStatus status = CellStatus::ok;
  std::string error;
  std::optional<std::int64_t> error_step;
  std::map<std::string, double> final_values;
};

struct ExperimentResult {
  std::string config_hash;
  std::vector<CellOutcome> cells;

  std::size_t failed() const;
  /// 0 when every cell succeeded (or was skipped), 2 on partial failure.
  int exit_code() const;
};

/// Runs every cell (or, for ntk_panels, every panel) and writes the result
/// bundle. Completed cells whose hash matches are skipped unless force.
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Writes data/seed_<s>.json for every seed plus a manifest.
void generate_data(const ExperimentConfig& config);

/// Kernel panels for every (depth, mode, seed); writes ntk_panels.json and a
/// manifest into the output directory.
ExperimentResult probe_ntk(const ExperimentConfig& config);

/// Human-readable aggregate of summary.csv grouped by grid entry.
std::string report(const std::filesystem::path& output_dir);

std::string sha256_hex(std::string_view data);

}  // namespace ngflow
