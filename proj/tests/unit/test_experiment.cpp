#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ngflow/errors.hpp"
#include "ngflow/experiment.hpp"
#include "ngflow/trajectory_io.hpp"

using namespace ngflow;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ngflow_test_" + name);
  fs::remove_all(dir);
  return dir;
}

fs::path config(const std::string& name) { return fs::path(NGFLOW_CONFIG_DIR) / name; }

const char* kMinimal = R"({
  "experiment": "toy2d",
  "output_dir": "out",
  "seeds": [0, 1],
  "run": {"optimizer": "egd", "step_size": 0.5, "max_steps": 30, "record_every": 10},
  "grid": [
    {"name": "egd_L1", "model": {"kind": "direct_vector", "depth": 1}},
    {"name": "egd_L2", "model": {"kind": "diagonal", "depth": 2, "init_scale": 0.3}}
  ]
})";

}  // namespace

TEST(ExperimentConfig, ShippedConfigsParse) {
  for (const char* name :
       {"toy2d.json", "sparse.json", "completion.json", "completion_collapsed.json",
        "ntk_panels.json"}) {
    EXPECT_NO_THROW(ExperimentConfig::load(config(name))) << name;
  }
  const auto c = ExperimentConfig::load(config("completion_collapsed.json"));
  ASSERT_EQ(c.grid.size(), 2u);
  EXPECT_EQ(c.grid[1].collapsed_from, 6);
  EXPECT_EQ(c.grid[0].model.dim, 20);
  EXPECT_EQ(c.grid[0].run.objective, Objective::completion);
}

TEST(ExperimentConfig, DefaultsAndInheritance) {
  const auto c = ExperimentConfig::parse(kMinimal);
  EXPECT_EQ(c.experiment, ExperimentKind::toy2d);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{0, 1}));
  ASSERT_EQ(c.grid.size(), 2u);
  EXPECT_EQ(c.grid[1].run.step_size, 0.5);
  EXPECT_EQ(c.grid[1].model.dim, 2);
  EXPECT_FALSE(c.grid[0].init_seed.has_value());
  EXPECT_EQ(c.toy2d.n_per_class, Toy2dParams{}.n_per_class);
  EXPECT_FALSE(c.canonical.empty());
}

TEST(ExperimentConfig, OverridesUseDottedPaths) {
  const auto c = ExperimentConfig::parse(
      kMinimal, {"grid.1.run.step_size=0.25", "seeds=[4]", "output_dir=/tmp/x y",
                 "data.n_per_class=5"});
  EXPECT_EQ(c.grid[1].run.step_size, 0.25);
  EXPECT_EQ(c.grid[0].run.step_size, 0.5);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{4}));
  EXPECT_EQ(c.output_dir, fs::path("/tmp/x y"));
  EXPECT_EQ(c.toy2d.n_per_class, 5);
  EXPECT_THROW(ExperimentConfig::parse(kMinimal, {"grid.9.run.step_size=1"}), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse(kMinimal, {"novalue"}), ConfigError);
}

TEST(ExperimentConfig, RejectsBadDocuments) {
  auto bad = [](const std::string& override) {
    return ExperimentConfig::parse(kMinimal, {override});
  };
  EXPECT_THROW(bad("colour=1"), ConfigError);
  EXPECT_THROW(bad("grid.0.modle={}"), ConfigError);
  EXPECT_THROW(bad("grid.0.model.kind=\"matfac\""), ConfigError);
  EXPECT_THROW(bad("grid.1.name=\"egd_L1\""), ConfigError);
  EXPECT_THROW(bad("grid.0.run.step_size=-1"), ConfigError);
  EXPECT_THROW(bad("seeds=[]"), ConfigError);
  EXPECT_THROW(bad("seeds=[1,1]"), ConfigError);
  EXPECT_THROW(bad("experiment=\"cifar\""), ConfigError);
  EXPECT_THROW(bad("grid.0.collapsed_from=4"), ConfigError);
  EXPECT_THROW(bad("grid.0.model.dim=3"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("{not json"), ConfigError);
}

TEST(Experiment, RunWritesBundleAndSkipsCompletedCells) {
  const fs::path dir = scratch_dir("bundle");
  const auto c = ExperimentConfig::parse(kMinimal, {"output_dir=" + dir.string()});
  const auto r = run_experiment(c, RunOptions{false, 2});
  ASSERT_EQ(r.cells.size(), 4u);
  EXPECT_EQ(r.exit_code(), 0);
  for (const auto& cell : r.cells) {
    EXPECT_EQ(cell.status, CellStatus::ok) << cell.error;
    EXPECT_TRUE(fs::exists(dir / "cells" / cell.id / "trajectory.jsonl"));
    EXPECT_TRUE(cell.final_values.count("train_accuracy"));
    EXPECT_TRUE(cell.final_values.count("cos_l2_margin"));
  }
  EXPECT_EQ(r.cells[0].id, "egd_L1__s0");

  std::ifstream traj(dir / "cells" / "egd_L2__s1" / "trajectory.jsonl");
  const auto records = read_trajectory_jsonl(traj);
  ASSERT_EQ(records.size(), 4u);
  EXPECT_EQ(records.back().step, 30);

  const json header = json::parse(slurp(dir / "cells" / "egd_L2__s1" / "header.json"));
  EXPECT_EQ(header["format"], "ngflow.trajectory");
  EXPECT_EQ(header["status"], "ok");
  EXPECT_EQ(header["model"]["kind"], "diagonal");

  const json manifest = json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["config_hash"], r.config_hash);
  EXPECT_EQ(manifest["cells"].size(), 4u);
  bool found = false;
  for (const auto& f : manifest["files"])
    if (f["path"] == "summary.csv") {
      found = true;
      EXPECT_EQ(f["sha256"], sha256_hex(slurp(dir / "summary.csv")));
    }
  EXPECT_TRUE(found);

  const std::string csv = slurp(dir / "summary.csv");
  EXPECT_EQ(csv.rfind("cell_id,name,seed,status", 0), 0u);

  const auto again = run_experiment(c);
  for (const auto& cell : again.cells) EXPECT_EQ(cell.status, CellStatus::skipped);
  EXPECT_EQ(slurp(dir / "summary.csv"), csv);
  const auto forced = run_experiment(c, RunOptions{true, 1});
  for (const auto& cell : forced.cells) EXPECT_EQ(cell.status, CellStatus::ok);
  EXPECT_EQ(slurp(dir / "summary.csv"), csv);

  // changing one entry invalidates only that entry's cells
  const auto changed = ExperimentConfig::parse(
      kMinimal, {"output_dir=" + dir.string(), "grid.1.run.step_size=0.25"});
  const auto partial = run_experiment(changed);
  EXPECT_EQ(partial.cells[0].status, CellStatus::skipped);
  EXPECT_EQ(partial.cells[2].status, CellStatus::ok);

  const std::string text = report(dir);
  EXPECT_NE(text.find("egd_L2"), std::string::npos);
  EXPECT_NE(text.find("train_accuracy"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Experiment, SolverFailureIsPartial) {
  const fs::path dir = scratch_dir("partial");
  const auto c = ExperimentConfig::parse(
      kMinimal, {"output_dir=" + dir.string(), "seeds=[0]", "grid.1.run.optimizer=\"ngd\"",
                 "grid.1.run.residual_tol=1e-300"});
  const auto r = run_experiment(c);
  ASSERT_EQ(r.cells.size(), 2u);
  EXPECT_EQ(r.cells[0].status, CellStatus::ok);
  EXPECT_EQ(r.cells[1].status, CellStatus::error);
  ASSERT_TRUE(r.cells[1].error_step.has_value());
  EXPECT_EQ(*r.cells[1].error_step, 0);
  EXPECT_EQ(r.failed(), 1u);
  EXPECT_EQ(r.exit_code(), 2);
  const json manifest = json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["cells"][1]["status"], "error");
  fs::remove_all(dir);
}

TEST(Experiment, CompletionCellsAndCollapsedInit) {
  const fs::path dir = scratch_dir("completion");
  const auto c = ExperimentConfig::load(
      config("completion_collapsed.json"),
      {"output_dir=" + dir.string(), "seeds=[0]", "run.max_steps=20", "run.record_every=10"});
  const auto r = run_experiment(c);
  ASSERT_EQ(r.cells.size(), 2u);
  for (const auto& cell : r.cells) {
    EXPECT_EQ(cell.status, CellStatus::ok) << cell.error;
    EXPECT_TRUE(cell.final_values.count("unobserved_mse"));
    EXPECT_TRUE(cell.final_values.count("effective_rank"));
  }
  const json header = json::parse(slurp(dir / "cells" / "egd_L2_from_L6__s0" / "header.json"));
  EXPECT_EQ(header["collapsed_from"], 6);
  fs::remove_all(dir);
}

TEST(Experiment, GenerateDataIsDeterministic) {
  const fs::path dir = scratch_dir("data");
  const auto c = ExperimentConfig::load(
      config("sparse.json"), {"output_dir=" + dir.string(), "seeds=[3]", "data.n_test=10",
                              "data.n_population=10"});
  generate_data(c);
  const std::string first = slurp(dir / "data" / "seed_3.json");
  generate_data(c);
  EXPECT_EQ(slurp(dir / "data" / "seed_3.json"), first);
  const json d = json::parse(first);
  EXPECT_EQ(d["train"]["X"].size(), 25u);
  EXPECT_EQ(d["ground_truth"].size(), 50u);
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  fs::remove_all(dir);
}

TEST(Experiment, NtkPanelsFile) {
  const fs::path dir = scratch_dir("ntk");
  const auto c = ExperimentConfig::load(config("ntk_panels.json"),
                                        {"output_dir=" + dir.string(), "data.dim=5",
                                         "data.probe=[2,2]", "data.depths=[1,2]"});
  const auto r = probe_ntk(c);
  EXPECT_EQ(r.cells.size(), 8u);
  EXPECT_EQ(r.exit_code(), 0);
  const json panels = json::parse(slurp(dir / "ntk_panels.json"));
  EXPECT_EQ(panels["format"], "ngflow.ntk_panels");
  ASSERT_EQ(panels["panels"].size(), 8u);
  for (const auto& p : panels["panels"]) {
    EXPECT_EQ(p["status"], "ok");
    EXPECT_EQ(p["response"].size(), 5u);
  }
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  fs::remove_all(dir);
}

TEST(Experiment, Sha256KnownAnswer) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
