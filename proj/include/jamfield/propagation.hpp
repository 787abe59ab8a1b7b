#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "jamfield/field_model.hpp"
#include "jamfield/geometry.hpp"

namespace jamfield {

/// Raised when an input point lies inside a building or observers cannot be
/// placed outside all buildings.
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Polygon {
  std::vector<geo::Vec2> vertices;
};

/// 2-D urban layout used by the image-method ray tracer.
struct BuildingMap {
  std::vector<Polygon> polygons;
  double reflection_loss_db = 6.0;
  int max_reflections = 4;
  double floor_dbw = -200.0;

  void validate() const;
  bool inside_any(geo::Vec2 p) const;
};

struct Area {
  std::vector<double> min;
  std::vector<double> max;

  std::size_t dim() const { return min.size(); }
  bool contains(const Position& p) const;
  void validate() const;
};

enum class Regime { pathloss, raytrace };

struct ScenarioConfig {
  JammerParams jammer{Position{500.0, 500.0}, 10.0, 2.0};
  Area area{{0.0, 0.0}, {1000.0, 1000.0}};
  std::size_t n_samples = 10000;
  std::size_t top_k = 15;
  double inr_db = 20.0;
  Regime regime = Regime::pathloss;
  BuildingMap buildings;
  double d_far = kDefaultFarField;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// Noise standard deviation (dB) giving INR = 10 log10(P0_lin / sigma^2).
double sigma_from_inr(double p0_dbw, double inr_db);
double inr_from_sigma(double p0_dbw, double sigma);

std::vector<Position> sample_observers(const ScenarioConfig& cfg);

/// One propagation path found by the tracer: the polyline from source to
/// observer and its received linear power.
struct RayPath {
  std::vector<geo::Vec2> points;
  int reflections = 0;
  double length = 0.0;
  double power_linear = 0.0;
};

/// Image-method tracer for a fixed source and building map. The image tree
/// (virtual sources with their clipped reflecting apertures) is built once in
/// the constructor and reused for every observer.
class RayTracer {
 public:
  RayTracer(const BuildingMap& map, geo::Vec2 source, double p0_dbw, double gamma,
            double d_far = kDefaultFarField);

  double rss_dbw(geo::Vec2 observer) const;
  std::vector<RayPath> paths(geo::Vec2 observer) const;
  std::size_t image_count() const { return nodes_.size(); }

 private:
  struct Edge {
    geo::Vec2 a;
    geo::Vec2 b;
    geo::Vec2 normal;  // outward
  };
  struct ImageNode {
    geo::Vec2 image;
    int edge = -1;
    int parent = -1;
    int depth = 0;
    geo::Vec2 ap0;  // aperture: part of the edge reachable from the parent beam
    geo::Vec2 ap1;
  };

  // Observer-side acceptance test of a node: in front of its edge and inside
  // the wedge from the image through the aperture.
  struct BeamTest {
    geo::Vec2 edge_point;
    geo::Vec2 normal;
    geo::Vec2 image;
    geo::Vec2 w0;
    geo::Vec2 w1;
  };

  static bool in_beam(const BeamTest& b, geo::Vec2 observer);
  bool leg_clear(geo::Vec2 p, geo::Vec2 q) const;
  bool trace_node(const ImageNode& node, geo::Vec2 observer, std::vector<geo::Vec2>& pts) const;
  double path_power(double length, int reflections) const;

  std::vector<Edge> edges_;
  std::vector<ImageNode> nodes_;
  std::vector<BeamTest> beams_;  // parallel to nodes_
  geo::Vec2 source_;
  double p0_linear_;
  double gamma_;
  double d_far_;
  double reflection_factor_;
  double floor_dbw_;
};

/// Received power at x through every direct and reflected path (incoherent sum).
double raytrace_rss(const Position& x, const JammerParams& jp, const BuildingMap& map,
                    double d_far = kDefaultFarField);

/// Noiseless RSS field of a scenario, evaluated at arbitrary points.
class FieldModel {
 public:
  explicit FieldModel(const ScenarioConfig& cfg);
  double rss(const Position& x) const;

 private:
  JammerParams jammer_;
  double d_far_;
  Regime regime_;
  std::optional<RayTracer> tracer_;
};

/// Observers of one realization with their noiseless RSS and unit-variance
/// noise draws. Independent of the INR, so one set serves a whole INR sweep.
struct CandidateSet {
  std::vector<Position> observers;
  std::vector<double> clean_dbw;
  std::vector<double> unit_noise;
  Provenance provenance = Provenance::pathloss;
};

CandidateSet sample_candidates(const ScenarioConfig& cfg, const FieldModel& field);

/// Scales the noise by sigma and keeps the top_k strongest measurements.
Dataset select_observations(const CandidateSet& candidates, double sigma, std::size_t top_k);

/// Samples observers, evaluates the noiseless field, adds N(0, sigma^2)
/// noise with sigma from the INR, and keeps the top_k strongest measurements.
Dataset generate_dataset(const ScenarioConfig& cfg);

}  // namespace jamfield
