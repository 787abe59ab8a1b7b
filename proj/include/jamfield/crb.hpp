#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "jamfield/field_model.hpp"

namespace jamfield {

/// Raised when the observer geometry makes the Fisher information singular.
class DegenerateGeometry : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct FisherMatrix {
  Eigen::MatrixXd entries;
  Position theta;
};

struct CrbReport {
  std::vector<double> variance;    // m^2, per dimension
  std::vector<double> rmse_bound;  // m, sqrt(variance)
};

/// Fisher information for the jammer position under the pathloss model with
/// i.i.d. N(0, sigma^2) noise:
///   I = 100 gamma^2 / (sigma^2 ln^2 10) * sum_n (theta - x_n)(theta - x_n)^T / d_n^4
FisherMatrix fim_pathloss(std::span<const Position> observers, const JammerParams& jp,
                          double sigma);

/// Closed-form 2-D bound from the sums a, b, c of the FIM.
CrbReport crb_2d(std::span<const Position> observers, const JammerParams& jp, double sigma);

/// Diagonal of the inverse FIM, any dimension.
CrbReport crb_from_fim(const FisherMatrix& fim);

using MeanFunction = std::function<std::vector<double>(const Position& theta)>;

/// J^T J / sigma^2 with J the central-difference Jacobian of the stacked mean
/// vector. Constant covariance, so the trace term of the general Gaussian FIM
/// vanishes.
FisherMatrix fim_numeric(const MeanFunction& mean_fn, const Position& theta, double sigma,
                         double step = 1e-4);

}  // namespace jamfield
