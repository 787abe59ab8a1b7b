#include "jamfield/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "jamfield/rng.hpp"

namespace jamfield {

using geo::Vec2;

namespace {

constexpr int kMaxPlacementRetries = 1000;
constexpr std::size_t kMaxImageNodes = 4'000'000;

Vec2 to_vec2(const Position& p) {
  if (p.dim() != 2) throw DimensionMismatch("ray tracing needs 2-D positions");
  return {p[0], p[1]};
}

bool edges_cross(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const double d1 = geo::cross(b - a, c - a);
  const double d2 = geo::cross(b - a, d - a);
  const double d3 = geo::cross(d - c, a - c);
  const double d4 = geo::cross(d - c, b - c);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 &&
         d4 != 0;
}

// Restricts the parameter interval [lo, hi] of a + s (b - a) to where the
// affine function f(s) = fa + s (fb - fa) is >= 0.
bool clip_halfplane(double fa, double fb, double& lo, double& hi) {
  if (fa >= 0 && fb >= 0) return lo <= hi;
  if (fa < 0 && fb < 0) return false;
  const double s = fa / (fa - fb);
  if (fa < 0) {
    lo = std::max(lo, s);
  } else {
    hi = std::min(hi, s);
  }
  return lo <= hi;
}

}  // namespace

void BuildingMap::validate() const {
  if (!(reflection_loss_db >= 0)) {
    throw std::invalid_argument("reflection loss must be >= 0");
  }
  if (max_reflections < 0) throw std::invalid_argument("max_reflections must be >= 0");
  for (std::size_t k = 0; k < polygons.size(); ++k) {
    const auto& v = polygons[k].vertices;
    if (v.size() < 3) throw std::invalid_argument("building polygon needs >= 3 vertices");
    if (std::abs(geo::signed_area(v)) <= 0.0) {
      throw std::invalid_argument("building polygon has zero area");
    }
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (j == i + 1 || (i == 0 && j == n - 1)) continue;
        if (edges_cross(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n])) {
          throw std::invalid_argument("building polygon " + std::to_string(k) +
                                      " is self-intersecting");
        }
      }
    }
  }
}

bool BuildingMap::inside_any(Vec2 p) const {
  return std::any_of(polygons.begin(), polygons.end(),
                     [&](const Polygon& poly) { return geo::point_in_polygon(p, poly.vertices); });
}

bool Area::contains(const Position& p) const {
  if (p.dim() != dim()) return false;
  for (std::size_t i = 0; i < dim(); ++i) {
    if (p[i] < min[i] || p[i] > max[i]) return false;
  }
  return true;
}

void Area::validate() const {
  if (min.empty() || min.size() != max.size()) throw std::invalid_argument("malformed area");
  for (std::size_t i = 0; i < dim(); ++i) {
    if (!(max[i] > min[i])) throw std::invalid_argument("area must have positive measure");
  }
}

void ScenarioConfig::validate() const {
  jammer.validate();
  area.validate();
  if (jammer.theta.dim() != area.dim()) throw DimensionMismatch("jammer and area dimensions differ");
  if (!area.contains(jammer.theta)) throw std::invalid_argument("jammer must lie inside the area");
  if (n_samples == 0) throw std::invalid_argument("n_samples must be >= 1");
  if (top_k == 0 || top_k > n_samples) throw std::invalid_argument("top_k must be in [1, n_samples]");
  if (!(d_far > 0)) throw std::invalid_argument("d_far must be > 0");
  if (regime == Regime::raytrace) {
    if (area.dim() != 2) throw DimensionMismatch("ray tracing scenarios are 2-D");
    buildings.validate();
    if (buildings.inside_any(to_vec2(jammer.theta))) {
      throw GeometryError("jammer lies inside a building");
    }
  }
}

double sigma_from_inr(double p0_dbw, double inr_db) {
  return std::sqrt(std::pow(10.0, (p0_dbw - inr_db) / 10.0));
}

double inr_from_sigma(double p0_dbw, double sigma) {
  return p0_dbw - 10.0 * std::log10(sigma * sigma);
}

std::vector<Position> sample_observers(const ScenarioConfig& cfg) {
  cfg.validate();
  const bool reject = cfg.regime == Regime::raytrace && !cfg.buildings.polygons.empty();
  std::vector<Position> out;
  out.reserve(cfg.n_samples);
  std::vector<double> c(cfg.area.dim());
  for (std::size_t i = 0; i < cfg.n_samples; ++i) {
    SplitMix64 rng(derive_seed(cfg.rng_seed, streams::kObservers, i));
    int tries = 0;
    for (;;) {
      for (std::size_t k = 0; k < c.size(); ++k) {
        c[k] = cfg.area.min[k] + uniform01(rng) * (cfg.area.max[k] - cfg.area.min[k]);
      }
      if (!reject || !cfg.buildings.inside_any({c[0], c[1]})) break;
      if (++tries >= kMaxPlacementRetries) {
        throw GeometryError("could not place observer " + std::to_string(i) +
                            " outside buildings");
      }
    }
    out.emplace_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ray tracer

RayTracer::RayTracer(const BuildingMap& map, Vec2 source, double p0_dbw, double gamma,
                     double d_far)
    : source_(source),
      p0_linear_(std::pow(10.0, p0_dbw / 10.0)),
      gamma_(gamma),
      d_far_(d_far),
      reflection_factor_(std::pow(10.0, -map.reflection_loss_db / 10.0)),
      floor_dbw_(map.floor_dbw) {
  map.validate();
  if (map.inside_any(source)) throw GeometryError("source lies inside a building");

  for (const auto& poly : map.polygons) {
    std::vector<Vec2> v = poly.vertices;
    if (geo::signed_area(v) < 0) std::reverse(v.begin(), v.end());
    for (std::size_t i = 0; i < v.size(); ++i) {
      const Vec2 a = v[i];
      const Vec2 b = v[(i + 1) % v.size()];
      const Vec2 d = b - a;
      const double len = geo::norm(d);
      edges_.push_back({a, b, {d.y / len, -d.x / len}});
    }
  }

  nodes_.push_back({source, -1, -1, 0, {}, {}});
  if (std::isinf(map.reflection_loss_db)) return;

  // Breadth-first expansion; children only for edges that intersect the
  // parent's beam, with the aperture clipped to that intersection.
  for (std::size_t idx = 0; idx < nodes_.size(); ++idx) {
    const ImageNode node = nodes_[idx];
    if (node.depth >= map.max_reflections) continue;
    for (int e = 0; e < static_cast<int>(edges_.size()); ++e) {
      if (e == node.edge) continue;
      const Edge& edge = edges_[e];
      if (geo::dot(node.image - edge.a, edge.normal) <= 1e-9) continue;

      double lo = 0.0;
      double hi = 1.0;
      if (node.edge >= 0) {
        const Edge& pe = edges_[node.edge];
        const auto front = [&](Vec2 p) { return geo::dot(p - pe.a, pe.normal); };
        if (!clip_halfplane(front(edge.a), front(edge.b), lo, hi)) continue;
        const double sgn =
            geo::cross(node.ap0 - node.image, node.ap1 - node.image) >= 0 ? 1.0 : -1.0;
        const auto h1 = [&](Vec2 p) {
          return sgn * geo::cross(node.ap0 - node.image, p - node.image);
        };
        const auto h2 = [&](Vec2 p) {
          return sgn * geo::cross(p - node.image, node.ap1 - node.image);
        };
        if (!clip_halfplane(h1(edge.a), h1(edge.b), lo, hi)) continue;
        if (!clip_halfplane(h2(edge.a), h2(edge.b), lo, hi)) continue;
        if (hi - lo < 1e-9) continue;
      }
      const Vec2 d = edge.b - edge.a;
      nodes_.push_back({geo::mirror(node.image, edge.a, edge.b), e, static_cast<int>(idx),
                        node.depth + 1, edge.a + d * lo, edge.a + d * hi});
      if (nodes_.size() > kMaxImageNodes) {
        throw std::runtime_error("image tree too large; reduce max_reflections");
      }
    }
  }

  beams_.resize(nodes_.size());
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    const ImageNode& n = nodes_[i];
    const Edge& e = edges_[n.edge];
    Vec2 w0 = n.ap0 - n.image;
    Vec2 w1 = n.ap1 - n.image;
    if (geo::cross(w0, w1) < 0) std::swap(w0, w1);
    beams_[i] = {e.a, e.normal, n.image, w0, w1};
  }
}

bool RayTracer::in_beam(const BeamTest& b, Vec2 observer) {
  if (geo::dot(observer - b.edge_point, b.normal) <= 1e-9) return false;
  const Vec2 rel = observer - b.image;
  const double tol = -1e-9 * geo::dot(rel, rel);
  return geo::cross(b.w0, rel) >= tol && geo::cross(rel, b.w1) >= tol;
}

bool RayTracer::leg_clear(Vec2 p, Vec2 q) const {
  const double xmin = std::min(p.x, q.x);
  const double xmax = std::max(p.x, q.x);
  const double ymin = std::min(p.y, q.y);
  const double ymax = std::max(p.y, q.y);
  for (const auto& e : edges_) {
    if (std::max(e.a.x, e.b.x) < xmin || std::min(e.a.x, e.b.x) > xmax ||
        std::max(e.a.y, e.b.y) < ymin || std::min(e.a.y, e.b.y) > ymax) {
      continue;
    }
    if (geo::segment_blocks(p, q, e.a, e.b)) return false;
  }
  return true;
}

bool RayTracer::trace_node(const ImageNode& node, Vec2 observer, std::vector<Vec2>& pts) const {
  constexpr double kTol = 1e-9;
  pts.clear();
  pts.push_back(observer);
  Vec2 target = observer;
  const ImageNode* cur = &node;
  while (cur->depth >= 1) {
    const auto hit = geo::line_intersection(cur->image, target, cur->ap0, cur->ap1);
    if (!hit || hit->u < -kTol || hit->u > 1.0 + kTol || hit->t <= 0.0 || hit->t >= 1.0) {
      return false;
    }
    const Vec2 r = cur->ap0 + (cur->ap1 - cur->ap0) * std::clamp(hit->u, 0.0, 1.0);
    pts.push_back(r);
    target = r;
    cur = &nodes_[cur->parent];
  }
  pts.push_back(source_);
  std::reverse(pts.begin(), pts.end());
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    if (!leg_clear(pts[i], pts[i + 1])) return false;
  }
  return true;
}

double RayTracer::path_power(double length, int reflections) const {
  return p0_linear_ * std::pow(std::max(length, d_far_), -gamma_) *
         std::pow(reflection_factor_, reflections);
}

std::vector<RayPath> RayTracer::paths(Vec2 observer) const {
  std::vector<RayPath> out;
  if (leg_clear(source_, observer)) {
    const double len = geo::norm(observer - source_);
    out.push_back({{source_, observer}, 0, len, path_power(len, 0)});
  }
  std::vector<Vec2> pts;
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    if (!in_beam(beams_[i], observer)) continue;
    if (!trace_node(nodes_[i], observer, pts)) continue;
    double len = 0.0;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) len += geo::norm(pts[k + 1] - pts[k]);
    out.push_back({pts, nodes_[i].depth, len, path_power(len, nodes_[i].depth)});
  }
  return out;
}

double RayTracer::rss_dbw(Vec2 observer) const {
  double total = 0.0;
  if (leg_clear(source_, observer)) total += path_power(geo::norm(observer - source_), 0);
  std::vector<Vec2> pts;
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    if (!in_beam(beams_[i], observer)) continue;
    if (!trace_node(nodes_[i], observer, pts)) continue;
    double len = 0.0;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) len += geo::norm(pts[k + 1] - pts[k]);
    total += path_power(len, nodes_[i].depth);
  }
  if (!(total > 0.0)) return floor_dbw_;
  return 10.0 * std::log10(total);
}

double raytrace_rss(const Position& x, const JammerParams& jp, const BuildingMap& map,
                    double d_far) {
  jp.validate();
  const Vec2 obs = to_vec2(x);
  if (map.inside_any(obs)) throw GeometryError("observer lies inside a building");
  const RayTracer tracer(map, to_vec2(jp.theta), jp.p0_dbw, jp.gamma, d_far);
  return tracer.rss_dbw(obs);
}

// ---------------------------------------------------------------------------

FieldModel::FieldModel(const ScenarioConfig& cfg)
    : jammer_(cfg.jammer), d_far_(cfg.d_far), regime_(cfg.regime) {
  if (regime_ == Regime::raytrace) {
    tracer_.emplace(cfg.buildings, to_vec2(cfg.jammer.theta), cfg.jammer.p0_dbw,
                    cfg.jammer.gamma, cfg.d_far);
  }
}

double FieldModel::rss(const Position& x) const {
  if (regime_ == Regime::pathloss) return clamped_rss(x, jammer_, d_far_);
  return tracer_->rss_dbw(to_vec2(x));
}

CandidateSet sample_candidates(const ScenarioConfig& cfg, const FieldModel& field) {
  CandidateSet c;
  c.observers = sample_observers(cfg);
  c.provenance = cfg.regime == Regime::pathloss ? Provenance::pathloss : Provenance::raytrace;
  c.clean_dbw.resize(c.observers.size());
  c.unit_noise.resize(c.observers.size());
  for (std::size_t i = 0; i < c.observers.size(); ++i) {
    SplitMix64 rng(derive_seed(cfg.rng_seed, streams::kNoise, i));
    std::normal_distribution<double> noise(0.0, 1.0);
    c.clean_dbw[i] = field.rss(c.observers[i]);
    c.unit_noise[i] = noise(rng);
  }
  return c;
}

Dataset select_observations(const CandidateSet& candidates, double sigma, std::size_t top_k) {
  const std::size_t n = candidates.observers.size();
  if (top_k == 0 || top_k > n) throw std::invalid_argument("top_k must be in [1, n_candidates]");
  std::vector<double> measured(n);
  for (std::size_t i = 0; i < n; ++i) {
    measured[i] = candidates.clean_dbw[i] + sigma * candidates.unit_noise[i];
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return measured[a] > measured[b]; });
  order.resize(top_k);

  Dataset ds;
  ds.sigma = sigma;
  ds.provenance = candidates.provenance;
  ds.n_candidates = n;
  ds.source_index = order;
  for (std::size_t i : order) ds.observations.push_back({candidates.observers[i], measured[i]});
  return ds;
}

Dataset generate_dataset(const ScenarioConfig& cfg) {
  cfg.validate();
  const FieldModel field(cfg);
  return select_observations(sample_candidates(cfg, field), sigma_from_inr(cfg.jammer.p0_dbw, cfg.inr_db),
                             cfg.top_k);
}

}  // namespace jamfield
