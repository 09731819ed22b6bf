// Command-line driver: bench <stage> --config <file> [--jobs N] [--seed S] [--paper-budgets]

#include <chrono>
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "kdisc/core/error.hpp"
#include "kdisc/core/parallel.hpp"
#include "kdisc/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Donor kidney discard benchmark pipeline"};
  std::string stage, config, work;
  int jobs = 0;
  std::uint64_t seed = 0;
  bool seed_given = false, paper = false, serial = false;

  app.add_option("stage", stage,
                 "synth | engineer | select | tune | train | evaluate | calibrate | explain | report | all")
      ->required();
  app.add_option("--config", config, "pipeline config (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--jobs", jobs, "worker cap for parallel kernels (0 = all cores)")->check(CLI::NonNegativeNumber);
  auto* seed_opt = app.add_option("--seed", seed, "master seed, overrides the config");
  app.add_flag("--paper-budgets", paper, "selection 1000 genomes, TPE 300 trials, 30 seeds");
  app.add_option("--work", work, "work directory, overrides the config");
  app.add_flag("--serial", serial, "use the serial reference kernels");
  CLI11_PARSE(app, argc, argv);
  seed_given = seed_opt->count() > 0;

  using namespace kdisc;
  try {
    auto cfg = harness::PipelineConfig::load(config);
    if (seed_given) {
      cfg.master_seed = seed;
      if (!cfg.source.contains("synth") || !cfg.source["synth"].contains("seed")) cfg.synth.seed = seed;
    }
    if (paper) cfg.apply_paper_budgets();
    if (!work.empty()) cfg.work_dir = work;
    cfg.validate();
    set_jobs(jobs);
    const Exec exec = serial ? Exec::Serial : Exec::Parallel;

    std::vector<harness::Stage> stages;
    if (stage == "all") {
      for (auto s : harness::all_stages())
        if (cfg.stage_enabled(harness::to_string(s))) stages.push_back(s);
    } else {
      stages.push_back(harness::stage_from_string(stage));
    }
    for (auto s : stages) {
      std::cout << "[" << harness::to_string(s) << "] running" << std::endl;
      const auto r = harness::run_stage(s, cfg, exec);
      for (const auto& n : r.notes) std::cout << "  " << n << "\n";
      std::printf("  %zu outputs in %.1f s\n", r.entry.outputs.size(), r.entry.duration_seconds);
    }
  } catch (const kdisc::StageOrderError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const kdisc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
