#include "jamfield/field_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace jamfield {

namespace {

void check_coords(const std::vector<double>& c) {
  if (c.empty()) throw std::invalid_argument("Position needs at least one coordinate");
  for (double v : c) {
    if (!std::isfinite(v)) throw std::invalid_argument("Position coordinates must be finite");
  }
}

void check_same_dim(const Position& a, const Position& b) {
  if (a.dim() != b.dim()) {
    throw DimensionMismatch("dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                            std::to_string(b.dim()));
  }
}

}  // namespace

Position::Position(std::initializer_list<double> coords) : coords_(coords) { check_coords(coords_); }

Position::Position(std::vector<double> coords) : coords_(std::move(coords)) { check_coords(coords_); }

void JammerParams::validate() const {
  if (theta.dim() == 0) throw std::invalid_argument("jammer position is empty");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("gamma must be > 0");
  if (!std::isfinite(p0_dbw)) throw std::invalid_argument("p0 must be finite");
}

std::vector<Position> Dataset::positions() const {
  std::vector<Position> out;
  out.reserve(observations.size());
  for (const auto& o : observations) out.push_back(o.x);
  return out;
}

void Dataset::validate() const {
  if (observations.empty()) throw std::invalid_argument("dataset is empty");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be > 0");
  const auto dim = observations.front().x.dim();
  for (const auto& o : observations) {
    if (o.x.dim() != dim) throw DimensionMismatch("dataset mixes dimensionalities");
    if (!std::isfinite(o.y_dbw)) throw std::invalid_argument("observation value must be finite");
  }
}

double distance(const Position& x, const Position& theta) {
  check_same_dim(x, theta);
  double s = 0.0;
  for (std::size_t i = 0; i < x.dim(); ++i) {
    const double d = x[i] - theta[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double pathloss_rss(const Position& x, const JammerParams& jp) {
  const double d = distance(x, jp.theta);
  if (d == 0.0) throw SingularInput("pathloss model is singular at zero distance");
  return jp.p0_dbw - jp.gamma * 10.0 * std::log10(d);
}

double clamped_rss(const Position& x, const JammerParams& jp, double d_far) {
  if (!(d_far > 0.0)) throw std::invalid_argument("far-field distance must be > 0");
  const double d = std::max(distance(x, jp.theta), d_far);
  return jp.p0_dbw - jp.gamma * 10.0 * std::log10(d);
}

std::vector<double> clamped_rss_grad_theta(const Position& x, const JammerParams& jp,
                                           double d_far) {
  if (!(d_far > 0.0)) throw std::invalid_argument("far-field distance must be > 0");
  const double d = distance(x, jp.theta);
  std::vector<double> g(x.dim(), 0.0);
  if (d < d_far) return g;
  // df/dtheta_i = -10 gamma / ln10 * (theta_i - x_i) / d^2
  const double k = -10.0 * jp.gamma / (std::numbers::ln10 * d * d);
  for (std::size_t i = 0; i < x.dim(); ++i) g[i] = k * (jp.theta[i] - x[i]);
  return g;
}

}  // namespace jamfield
