#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "jamfield/field_model.hpp"
#include "jamfield/mlp.hpp"

namespace jamfield {

enum class EstimatorKind { mle_pathloss, apbm, apbm_p0_blind, pl_only, nn_only };

std::string_view to_string(EstimatorKind kind);
EstimatorKind parse_estimator_kind(std::string_view name);

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::apbm;
  std::string name;  // output label, defaults to the kind name
  double beta = 1.0;
  int epochs = 200;
  double lr = 0.4;
  // The step size decays geometrically from lr to lr * lr_final_ratio.
  double lr_final_ratio = 1.0;
  // Step size of the network block; defaults to lr.
  std::optional<double> nn_lr;
  // Epochs at the start of each run during which the network is held at
  // its initialization and only the physics block moves.
  int nn_warmup_epochs = 0;
  // Start the output layer at zero so g == 0 initially.
  bool zero_output_init = true;
  // Meters per optimizer unit of theta; defaults to the network input
  // half-width so theta and the network input share coordinates.
  std::optional<double> theta_unit_m;
  // dB per optimizer unit of P0 (P0-blind only).
  double p0_unit_db = 1.0;
  int n_starts = 1;
  std::vector<std::size_t> hidden{200, 100};
  std::optional<Position> theta_init;
  std::optional<double> p0_init_dbw;
  int grid_points = 101;
  std::uint64_t seed = 0;

  void validate() const;
  std::string label() const;
};

/// What the pathloss-based methods are told about the jammer.
struct KnownPhysics {
  double p0_dbw = 10.0;
  double gamma = 2.0;
};

enum class StopReason { tolerance, budget, diverged, non_identifiable };
std::string_view to_string(StopReason reason);

struct EstimateReport {
  std::string estimator;
  Position theta_hat;
  std::optional<double> p0_hat;
  std::optional<MlpParams> phi_hat;
  double final_cost = 0.0;
  bool converged = false;
  StopReason stop_reason = StopReason::budget;
  int iterations = 0;
  double wall_time_s = 0.0;
  std::vector<double> cost_history;
  std::string diagnostic;
};

/// Gaussian log-likelihood of the data under the clamped pathloss model.
double log_likelihood(const Dataset& data, const JammerParams& jp, double d_far = kDefaultFarField);

/// Same with the raw (unclamped) model; infinite when theta hits an observer.
double log_likelihood_unclamped(const Dataset& data, const JammerParams& jp);

/// Multi-start Adam ascent of the log-likelihood with P0 and gamma known.
EstimateReport mle_estimate(const Dataset& data, const KnownPhysics& known, double d_far,
                            const EstimatorSpec& spec);

/// sum_n (y_n - f(x_n; theta) - g(x_n; phi))^2 + beta ||phi||^2.
double apbm_cost(const Dataset& data, const JammerParams& jp, const MlpParams& phi, double beta,
                 double d_far = kDefaultFarField);
/// Cost with g == 0 (pathloss term only).
double apbm_cost(const Dataset& data, const JammerParams& jp, double d_far = kDefaultFarField);

/// Joint full-batch Adam fit of the active blocks for apbm, apbm_p0_blind,
/// pl_only and nn_only.
EstimateReport apbm_fit(const Dataset& data, const EstimatorSpec& spec, const KnownPhysics& known,
                        double d_far = kDefaultFarField);

/// Dispatches on spec.kind.
EstimateReport run_estimator(const Dataset& data, const EstimatorSpec& spec,
                             const KnownPhysics& known, double d_far = kDefaultFarField);

/// Network input map used by the APBM family: the bounding box of the
/// observations mapped to [-1, 1] per axis (half-width at least d_far).
InputScaling data_scaling(const Dataset& data, double d_far);

std::string report_to_json(const EstimateReport& report);

}  // namespace jamfield
