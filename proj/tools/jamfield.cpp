// jamfield: Monte Carlo jammer localization experiments.
//
//   jamfield run   --config exp.json [--out dir] [--seed n] [--workers n] [--no-timing]
//   jamfield crb   --config exp.json
//   jamfield field --config exp.json [--out dir] [--grid n]
//   jamfield estimate --config exp.json [--realization r] [--inr dB]

#include <chrono>
#include <cstdio>
#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "jamfield/config.hpp"
#include "jamfield/harness.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
};

jamfield::ExperimentConfig load(const Common& c) {
  auto cfg = jamfield::load_experiment_config(c.config);
  if (c.seed) cfg.master_seed = *c.seed;
  if (c.workers) cfg.workers = *c.workers;
  return cfg;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config,-c", c.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "override the master seed");
  cmd->add_option("--workers,-j", c.workers, "worker threads, 0 for one per core");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Jammer localization with augmented physics-based models"};
  app.require_subcommand(1);

  Common common;
  std::string out_dir;
  bool no_timing = false;
  int grid = 200;
  std::size_t realization = 0;
  std::optional<double> inr;

  auto* run = app.add_subcommand("run", "Monte Carlo INR sweep, writes results.csv and plots");
  add_common(run, common);
  run->add_option("--out,-o", out_dir, "output directory (default: config output_dir)");
  run->add_flag("--no-timing", no_timing, "write nan for mean_ms so results.csv is reproducible");

  auto* crb = app.add_subcommand("crb", "print the averaged Cramer-Rao bound table");
  add_common(crb, common);

  auto* field = app.add_subcommand("field", "noiseless power-field heatmap (SVG and CSV)");
  add_common(field, common);
  field->add_option("--out,-o", out_dir, "output directory (default: config output_dir)");
  field->add_option("--grid", grid, "cells per axis")->check(CLI::Range(2, 2000));

  auto* estimate = app.add_subcommand("estimate", "run every estimator on one realization, print reports");
  add_common(estimate, common);
  estimate->add_option("--realization,-r", realization, "Monte Carlo realization index");
  estimate->add_option("--inr", inr, "INR in dB (default: scenario inr_db)");

  CLI11_PARSE(app, argc, argv);

  try {
    auto cfg = load(common);
    if (*run) {
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      if (no_timing) cfg.record_timing = false;
      const auto t0 = std::chrono::steady_clock::now();
      const auto result = jamfield::run_sweep(cfg);
      jamfield::emit_outputs(result, cfg.output_dir);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::printf("%-16s %8s", "estimator", "inr_db");
      for (std::size_t d = 0; d < result.dim; ++d) std::printf("   rmse_%zu_m    crb_%zu_m", d, d);
      std::printf("  conv\n");
      for (std::size_t e = 0; e < result.estimators.size(); ++e) {
        for (std::size_t i = 0; i < result.inr_grid_db.size(); ++i) {
          const auto& c = result.cell(e, i);
          std::printf("%-16s %8.2f", c.estimator.c_str(), c.inr_db);
          for (std::size_t d = 0; d < result.dim; ++d) {
            std::printf(" %11.4g %11.4g", c.rmse[d], result.crb_rmse[i][d]);
          }
          std::printf("  %4.2f\n", c.converged_frac);
        }
      }
      std::printf("wrote %s (%.1f s)\n", (cfg.output_dir / "results.csv").c_str(), secs);
    } else if (*crb) {
      const auto table = jamfield::crb_table(cfg);
      std::printf("%8s", "inr_db");
      for (std::size_t d = 0; d < cfg.scenario.jammer.theta.dim(); ++d) std::printf("  crb_rmse_%zu_m", d);
      std::printf("\n");
      for (std::size_t i = 0; i < table.size(); ++i) {
        std::printf("%8.2f", cfg.inr_grid_db[i]);
        for (double v : table[i]) std::printf("  %12.6g", v);
        std::printf("\n");
      }
    } else if (*field) {
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      jamfield::emit_field(cfg, cfg.output_dir, grid);
      std::printf("wrote %s and %s\n", (cfg.output_dir / "field.svg").c_str(),
                  (cfg.output_dir / "field.csv").c_str());
    } else if (*estimate) {
      auto sc = cfg.scenario;
      sc.rng_seed = jamfield::realization_seed(cfg.master_seed, realization);
      if (inr) sc.inr_db = *inr;
      const auto data = jamfield::generate_dataset(sc);
      const jamfield::KnownPhysics known{sc.jammer.p0_dbw, sc.jammer.gamma};
      for (const auto& spec : cfg.estimators) {
        const auto report = jamfield::run_estimator(data, spec, known, sc.d_far);
        std::cout << jamfield::report_to_json(report) << "\n";
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "jamfield: %s\n", e.what());
    return 1;
  }
  return 0;
}
