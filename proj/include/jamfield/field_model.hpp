#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

namespace jamfield {

/// Raised when two positions of different dimensionality are combined.
class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when the raw pathloss model is evaluated at zero distance.
class SingularInput : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Point in D-dimensional space, in meters. Coordinates are always finite.
class Position {
 public:
  Position() = default;
  Position(std::initializer_list<double> coords);
  explicit Position(std::vector<double> coords);

  std::size_t dim() const { return coords_.size(); }
  double operator[](std::size_t i) const { return coords_[i]; }
  std::span<const double> coords() const { return coords_; }

  bool operator==(const Position&) const = default;

 private:
  std::vector<double> coords_;
};

/// Jammer location plus the two pathloss constants: power at 1 m (dBW)
/// and the pathloss exponent.
struct JammerParams {
  Position theta;
  double p0_dbw = 10.0;
  double gamma = 2.0;

  void validate() const;
};

struct Observation {
  Position x;
  double y_dbw = 0.0;
};

enum class Provenance { pathloss, raytrace };

/// Ordered RSS observations. `source_index` maps each kept observation back
/// to the observer it came from before top-K selection (empty when unknown).
struct Dataset {
  std::vector<Observation> observations;
  double sigma = 1.0;
  Provenance provenance = Provenance::pathloss;
  std::vector<std::size_t> source_index;
  std::size_t n_candidates = 0;

  std::size_t size() const { return observations.size(); }
  std::vector<Position> positions() const;
  void validate() const;
};

inline constexpr double kDefaultFarField = 1.0;

double distance(const Position& x, const Position& theta);

/// P0 - 10 gamma log10(d). Throws SingularInput when d == 0.
double pathloss_rss(const Position& x, const JammerParams& jp);

/// Pathloss with the distance clamped from below at the far-field distance.
double clamped_rss(const Position& x, const JammerParams& jp, double d_far = kDefaultFarField);

/// Gradient of clamped_rss with respect to theta. Zero strictly inside the
/// clamp region; on the boundary d == d_far the far-field branch is used.
std::vector<double> clamped_rss_grad_theta(const Position& x, const JammerParams& jp,
                                           double d_far = kDefaultFarField);

}  // namespace jamfield
