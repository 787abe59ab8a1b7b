#include "jamfield/crb.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace jamfield {

namespace {

double fim_scale(const JammerParams& jp, double sigma) {
  constexpr double ln10 = std::numbers::ln10;
  return 100.0 * jp.gamma * jp.gamma / (sigma * sigma * ln10 * ln10);
}

void check_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be > 0");
}

}  // namespace

FisherMatrix fim_pathloss(std::span<const Position> observers, const JammerParams& jp,
                          double sigma) {
  check_sigma(sigma);
  jp.validate();
  const auto dim = jp.theta.dim();
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd diff(dim);
  for (const auto& x : observers) {
    const double d = distance(x, jp.theta);
    if (d == 0.0) throw DegenerateGeometry("observer coincides with the jammer position");
    for (std::size_t i = 0; i < dim; ++i) diff[i] = jp.theta[i] - x[i];
    const double d2 = d * d;
    sum.noalias() += diff * diff.transpose() / (d2 * d2);
  }
  return {fim_scale(jp, sigma) * sum, jp.theta};
}

CrbReport crb_2d(std::span<const Position> observers, const JammerParams& jp, double sigma) {
  check_sigma(sigma);
  jp.validate();
  if (jp.theta.dim() != 2) throw DimensionMismatch("crb_2d needs 2-D positions");
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  for (const auto& x : observers) {
    const double d = distance(x, jp.theta);
    if (d == 0.0) throw DegenerateGeometry("observer coincides with the jammer position");
    const double d4 = d * d * d * d;
    const double u = jp.theta[0] - x[0];
    const double v = jp.theta[1] - x[1];
    a += u * u / d4;
    b += v * v / d4;
    c += u * v / d4;
  }
  const double det = a * b - c * c;
  if (!(det > 1e-12 * a * b) || !std::isfinite(det)) {
    throw DegenerateGeometry("observer geometry is degenerate (ab - c^2 = 0)");
  }
  const double k = 1.0 / fim_scale(jp, sigma);
  CrbReport r;
  r.variance = {k * b / det, k * a / det};
  for (double v : r.variance) r.rmse_bound.push_back(std::sqrt(v));
  return r;
}

CrbReport crb_from_fim(const FisherMatrix& fim) {
  const auto n = fim.entries.rows();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(fim.entries);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) throw DegenerateGeometry("Fisher information matrix is singular");
  const Eigen::MatrixXd inv = lu.inverse();
  CrbReport r;
  for (Eigen::Index i = 0; i < n; ++i) {
    r.variance.push_back(inv(i, i));
    r.rmse_bound.push_back(std::sqrt(std::max(inv(i, i), 0.0)));
  }
  return r;
}

FisherMatrix fim_numeric(const MeanFunction& mean_fn, const Position& theta, double sigma,
                         double step) {
  check_sigma(sigma);
  const auto dim = theta.dim();
  std::vector<double> base(theta.coords().begin(), theta.coords().end());
  Eigen::MatrixXd jac;
  for (std::size_t i = 0; i < dim; ++i) {
    auto plus = base;
    auto minus = base;
    plus[i] += step;
    minus[i] -= step;
    const auto mp = mean_fn(Position(plus));
    const auto mm = mean_fn(Position(minus));
    if (mp.size() != mm.size()) throw std::runtime_error("mean function changed length");
    if (i == 0) jac = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(mp.size()), dim);
    for (std::size_t n = 0; n < mp.size(); ++n) jac(n, i) = (mp[n] - mm[n]) / (2.0 * step);
  }
  return {jac.transpose() * jac / (sigma * sigma), theta};
}

}  // namespace jamfield
