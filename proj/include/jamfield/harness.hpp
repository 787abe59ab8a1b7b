#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "jamfield/crb.hpp"
#include "jamfield/estimators.hpp"
#include "jamfield/propagation.hpp"

namespace jamfield {

struct ExperimentConfig {
  ScenarioConfig scenario;
  std::vector<EstimatorSpec> estimators;
  std::vector<double> inr_grid_db{0, 5, 10, 15, 20, 25, 30};
  std::size_t n_mc = 100;
  std::filesystem::path output_dir = "jamfield-out";
  std::uint64_t master_seed = 1;
  unsigned workers = 0;  // 0: one per hardware thread
  bool record_timing = true;

  void validate() const;
};

/// Seed of Monte Carlo realization `index`; shared across the INR grid so the
/// sweep uses common random numbers.
std::uint64_t realization_seed(std::uint64_t master_seed, std::size_t index);

/// One (estimator, INR) cell of the sweep.
struct SweepCell {
  std::string estimator;
  double inr_db = 0.0;
  std::vector<double> rmse;  // per dimension, over all realizations
  double converged_frac = 0.0;
  double mean_ms = 0.0;
  std::size_t n_finite = 0;
};

struct SweepResult {
  std::vector<std::string> estimators;
  std::vector<double> inr_grid_db;
  std::size_t dim = 2;
  std::size_t n_mc = 0;
  std::vector<SweepCell> cells;             // estimator-major, then INR
  std::vector<std::vector<double>> crb_rmse;  // [inr][dim], sqrt of mean CRB variance
  // Raw estimates, [estimator][inr][realization].
  std::vector<std::vector<std::vector<Position>>> estimates;
  Position truth;

  const SweepCell& cell(std::size_t estimator, std::size_t inr) const {
    return cells[estimator * inr_grid_db.size() + inr];
  }
};

std::vector<double> rmse_per_dimension(std::span<const Position> estimates, const Position& truth);

/// Per-dimension sqrt of the CRB variance averaged over the realizations'
/// selected observer sets; realizations with degenerate geometry are skipped.
std::vector<std::vector<double>> crb_table(const ExperimentConfig& cfg);

SweepResult run_sweep(const ExperimentConfig& cfg);

void write_results_csv(const SweepResult& result, const std::filesystem::path& file);
/// results.csv, rmse_vs_inr.svg and crb_note.txt in dir.
void emit_outputs(const SweepResult& result, const std::filesystem::path& dir);

/// Noiseless field heatmap (SVG and CSV) with buildings, jammer and one
/// realization's selected observers overlaid.
void emit_field(const ExperimentConfig& cfg, const std::filesystem::path& dir, int grid = 200);

}  // namespace jamfield
