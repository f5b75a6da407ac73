// ngflow: generate datasets, run experiment grids, probe tangent kernels and
// summarize results.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 some cells failed.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ngflow/errors.hpp"
#include "ngflow/experiment.hpp"

namespace {

struct Common {
  std::string config;
  std::string output;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Experiment config (JSON)")->required()->check(
      CLI::ExistingFile);
  cmd->add_option("--output", c.output, "Output directory (overrides output_dir)");
  cmd->add_option("--seed", c.seeds, "Seed to run; repeat to run several (overrides seeds)");
  cmd->add_option("--grid-override", c.overrides,
                  "dotted.key=value applied to the config before validation; repeatable");
}

std::string json_string(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  return out + '"';
}

ngflow::ExperimentConfig load(const Common& c) {
  std::vector<std::string> overrides = c.overrides;
  if (!c.output.empty()) overrides.push_back("output_dir=" + json_string(c.output));
  if (!c.seeds.empty()) {
    std::string list = "seeds=[";
    for (std::size_t i = 0; i < c.seeds.size(); ++i)
      list += (i ? "," : "") + std::to_string(c.seeds[i]);
    overrides.push_back(list + "]");
  }
  return ngflow::ExperimentConfig::load(c.config, overrides);
}

void print_cells(const ngflow::ExperimentResult& r) {
  for (const auto& cell : r.cells) {
    std::cout << ngflow::to_string(cell.status) << "  " << cell.id;
    if (!cell.error.empty()) std::cout << "  " << cell.error;
    std::cout << '\n';
  }
  std::cout << r.cells.size() - r.failed() << '/' << r.cells.size() << " cells ok\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Natural and Euclidean gradient flow experiments"};
  app.require_subcommand(1);

  Common gen_opts, run_opts, ntk_opts;
  bool force = false;
  int jobs = 1;
  std::string report_dir;

  auto* gen = app.add_subcommand("generate", "Write the datasets for every seed");
  add_common(gen, gen_opts);
  auto* run = app.add_subcommand("run", "Run every (grid entry, seed) cell");
  add_common(run, run_opts);
  run->add_flag("--force", force, "Recompute cells that already completed");
  run->add_option("--jobs", jobs, "Cells to run in parallel")->check(CLI::PositiveNumber);
  auto* ntk = app.add_subcommand("probe-ntk", "Compute tangent-kernel panels");
  add_common(ntk, ntk_opts);
  auto* rep = app.add_subcommand("report", "Summarize a result directory");
  rep->add_option("dir", report_dir, "Result directory holding summary.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      const auto config = load(gen_opts);
      ngflow::generate_data(config);
      std::cout << "wrote " << config.seeds.size() << " datasets to "
                << (config.output_dir / "data").string() << '\n';
      return 0;
    }
    if (*run) {
      const auto config = load(run_opts);
      const auto result = ngflow::run_experiment(config, ngflow::RunOptions{force, jobs});
      print_cells(result);
      return result.exit_code();
    }
    if (*ntk) {
      auto config = load(ntk_opts);
      if (config.experiment != ngflow::ExperimentKind::ntk_panels) {
        std::cerr << "error: probe-ntk needs an ntk_panels config\n";
        return 1;
      }
      const auto result = ngflow::probe_ntk(config);
      print_cells(result);
      return result.exit_code();
    }
    if (*rep) {
      std::cout << ngflow::report(report_dir);
      return 0;
    }
  } catch (const ngflow::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const ngflow::ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
