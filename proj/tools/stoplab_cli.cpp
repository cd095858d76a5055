// stoplab command-line entry point.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "stoplab/harness.hpp"

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::string seeds;
  std::string algorithms;
  int jobs = -1;
  bool resume = false;
};

void add_common(CLI::App* cmd, Flags& f, bool with_resume) {
  cmd->add_option("--config", f.config, "run configuration file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "output directory (overrides [run] out_dir)");
  cmd->add_option("--seeds", f.seeds, "comma-separated seeds or ranges, e.g. 0-4");
  cmd->add_option("--algorithms", f.algorithms, "comma-separated algorithm tags or 'all'");
  cmd->add_option("--jobs", f.jobs, "parallel runs (0 = all cores)")->check(CLI::NonNegativeNumber);
  if (with_resume) cmd->add_flag("--resume", f.resume, "skip runs whose checkpoint already exists");
}

stoplab::RunConfig resolve(const Flags& f) {
  auto cfg = stoplab::load_config(f.config);
  stoplab::apply_env_overrides(cfg);
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (f.jobs >= 0) cfg.jobs = f.jobs;
  try {
    if (!f.seeds.empty()) cfg.seeds = stoplab::parse_seed_list(f.seeds);
    if (!f.algorithms.empty()) {
      cfg.algorithms.clear();
      std::size_t pos = 0;
      while (pos <= f.algorithms.size()) {
        const auto comma = f.algorithms.find(',', pos);
        const auto tag = f.algorithms.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        if (tag == "all") {
          cfg.algorithms = stoplab::all_algorithms();
          break;
        }
        if (!tag.empty()) cfg.algorithms.push_back(stoplab::parse_algorithm(tag));
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
    }
  } catch (const std::invalid_argument& e) {
    throw stoplab::ConfigError(e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stoplab: inverse optimal stopping experiments"};
  app.require_subcommand(1);
  Flags flags;
  auto* gen = app.add_subcommand("gen-data", "simulate or ingest and label the expert data");
  auto* trn = app.add_subcommand("train", "train every (algorithm, seed) pair");
  auto* evl = app.add_subcommand("evaluate", "score checkpoints on the test paths");
  auto* hm = app.add_subcommand("export-heatmaps", "write Q surfaces and stopping boundaries");
  auto* swp = app.add_subcommand("sweep", "gen-data, train and evaluate in one go");
  add_common(gen, flags, false);
  add_common(trn, flags, true);
  add_common(evl, flags, false);
  add_common(hm, flags, false);
  add_common(swp, flags, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : stoplab::kExitUsage;
  }

  stoplab::RunConfig cfg;
  try {
    cfg = resolve(flags);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return stoplab::kExitUsage;
  }

  try {
    if (gen->parsed()) return stoplab::cmd_gen_data(cfg, std::cout);
    if (trn->parsed()) return stoplab::cmd_train(cfg, flags.resume, std::cout);
    if (evl->parsed()) return stoplab::cmd_evaluate(cfg, std::cout);
    if (hm->parsed()) return stoplab::cmd_export_heatmaps(cfg, std::cout);
    return stoplab::cmd_sweep(cfg, flags.resume, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return stoplab::kExitRunFailure;
  }
}
