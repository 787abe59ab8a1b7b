#include "jamfield/estimators.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <nlohmann/json.hpp>

#include <Eigen/Dense>

#include "jamfield/rng.hpp"

namespace jamfield {

namespace {

using Clock = std::chrono::steady_clock;

constexpr double kRelTolerance = 1e-9;
constexpr int kToleranceWindow = 10;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool stalled(const std::vector<double>& history) {
  if (history.size() <= static_cast<std::size_t>(kToleranceWindow)) return false;
  const double now = history.back();
  const double then = history[history.size() - 1 - kToleranceWindow];
  const double scale = std::max(std::abs(now), std::numeric_limits<double>::min());
  return std::abs(then - now) / scale < kRelTolerance;
}

double step_size(const EstimatorSpec& spec, int epoch) {
  if (spec.lr_final_ratio == 1.0 || spec.epochs <= 1) return spec.lr;
  const double frac = static_cast<double>(epoch) / static_cast<double>(spec.epochs - 1);
  return spec.lr * std::pow(spec.lr_final_ratio, frac);
}

// Observation indices, strongest measurement first (ties by index).
std::vector<std::size_t> strongest_first(const Dataset& data) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return data.observations[a].y_dbw > data.observations[b].y_dbw;
  });
  return order;
}

std::vector<double> jittered_start(const Dataset& data, const std::vector<std::size_t>& order,
                                   int start, double d_far, std::uint64_t seed) {
  const auto& x = data.observations[order[static_cast<std::size_t>(start) % order.size()]].x;
  SplitMix64 rng(derive_seed(seed, streams::kStarts, static_cast<std::uint64_t>(start)));
  std::vector<double> theta(x.coords().begin(), x.coords().end());
  for (double& t : theta) t += 2.0 * d_far * (2.0 * uniform01(rng) - 1.0);
  return theta;
}

// Clamped-model Fisher information at theta; identifiability requires it to
// be well conditioned.
bool identifiable(const Dataset& data, const JammerParams& jp, double d_far) {
  const auto dim = jp.theta.dim();
  if (data.size() < 2) return false;
  Eigen::MatrixXd fim = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& o : data.observations) {
    const auto g = clamped_rss_grad_theta(o.x, jp, d_far);
    const Eigen::Map<const Eigen::VectorXd> gv(g.data(), static_cast<Eigen::Index>(dim));
    fim.noalias() += gv * gv.transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fim);
  const double hi = eig.eigenvalues().maxCoeff();
  const double lo = eig.eigenvalues().minCoeff();
  return hi > 0.0 && lo > 1e-9 * hi;
}

// ---------------------------------------------------------------------------
// Joint cost for the APBM family. The optimized vector is laid out as
// [theta in scaled coordinates | P0 | phi], each block present only when the
// estimator kind uses it.

class ApbmProblem {
 public:
  ApbmProblem(const Dataset& data, const EstimatorSpec& spec, const KnownPhysics& known,
              double d_far)
      : data_(data),
        spec_(spec),
        known_(known),
        d_far_(d_far),
        dim_(data.observations.front().x.dim()),
        use_theta_(spec.kind != EstimatorKind::nn_only),
        use_p0_(spec.kind == EstimatorKind::apbm_p0_blind),
        use_nn_(spec.kind != EstimatorKind::pl_only),
        scaling_(data_scaling(data, d_far)),
        theta_unit_(spec.theta_unit_m ? std::vector<double>(dim_, *spec.theta_unit_m)
                                      : scaling_.half_width) {
    if (use_nn_) {
      std::vector<std::size_t> layers{dim_};
      layers.insert(layers.end(), spec.hidden.begin(), spec.hidden.end());
      layers.push_back(1);
      net_ = init_mlp(std::move(layers), scaling_,
                      derive_seed(spec.seed, streams::kEstimator, 0));
      if (spec.zero_output_init) {
        const auto last = net_.n_layers() - 1;
        auto v = net_.values();
        std::fill(v.begin() + static_cast<std::ptrdiff_t>(net_.weight_offset(last)), v.end(), 0.0);
      }
      std::vector<std::vector<double>> scaled(data.size(), std::vector<double>(dim_));
      for (std::size_t n = 0; n < data.size(); ++n) scaling_.apply(data.observations[n].x, scaled[n]);
      batch_.emplace(net_, scaled);
    }
    theta_off_ = 0;
    p0_off_ = theta_off_ + (use_theta_ ? dim_ : 0);
    phi_off_ = p0_off_ + (use_p0_ ? 1 : 0);
    size_ = phi_off_ + (use_nn_ ? net_.size() : 0);
  }

  std::size_t size() const { return size_; }
  // Length of the leading [theta | P0] block.
  std::size_t physics_size() const { return phi_off_; }

  std::vector<double> initial_vector(const std::vector<double>& theta_m) const {
    std::vector<double> z(size_, 0.0);
    if (use_theta_) {
      for (std::size_t i = 0; i < dim_; ++i) {
        z[theta_off_ + i] = (theta_m[i] - scaling_.center[i]) / theta_unit_[i];
      }
    }
    if (use_p0_) z[p0_off_] = spec_.p0_init_dbw.value_or(known_.p0_dbw) / spec_.p0_unit_db;
    if (use_nn_) {
      std::copy(net_.values().begin(), net_.values().end(), z.begin() + phi_off_);
    }
    return z;
  }

  Position theta_meters(const std::vector<double>& z) const {
    std::vector<double> t(dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
      t[i] = scaling_.center[i] + theta_unit_[i] * z[theta_off_ + i];
    }
    return Position(std::move(t));
  }

  double p0(const std::vector<double>& z) const {
    return use_p0_ ? spec_.p0_unit_db * z[p0_off_] : known_.p0_dbw;
  }

  // Cost at z; gradient written to grad when non-empty.
  double evaluate(const std::vector<double>& z, std::span<double> grad) {
    const bool want_grad = !grad.empty();
    if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
    if (use_nn_) load_phi(z);
    JammerParams jp;
    if (use_theta_) jp = {theta_meters(z), p0(z), known_.gamma};
    std::span<double> phi_grad;
    if (use_nn_ && want_grad) phi_grad = grad.subspan(phi_off_, net_.size());

    std::span<const double> g_out;
    if (use_nn_) g_out = batch_->forward(net_);
    upstream_.assign(data_.size(), 0.0);
    double cost = 0.0;
    for (std::size_t n = 0; n < data_.size(); ++n) {
      const auto& obs = data_.observations[n];
      double h = 0.0;
      if (use_theta_) h += clamped_rss(obs.x, jp, d_far_);
      if (use_nn_) h += g_out[n];
      const double r = obs.y_dbw - h;
      cost += r * r;
      if (!want_grad) continue;
      const double upstream = -2.0 * r;  // dC/dh
      upstream_[n] = upstream;
      if (use_theta_) {
        const auto g = clamped_rss_grad_theta(obs.x, jp, d_far_);
        for (std::size_t i = 0; i < dim_; ++i) {
          grad[theta_off_ + i] += upstream * g[i] * theta_unit_[i];
        }
      }
      if (use_p0_) grad[p0_off_] += upstream * spec_.p0_unit_db;
    }
    if (use_nn_ && want_grad) batch_->backward(net_, upstream_, phi_grad);
    if (use_nn_) {
      const auto phi = net_.values();
      double sq = 0.0;
      for (std::size_t k = 0; k < phi.size(); ++k) {
        sq += phi[k] * phi[k];
        if (want_grad) phi_grad[k] += 2.0 * spec_.beta * phi[k];
      }
      cost += spec_.beta * sq;
    }
    return cost;
  }

  const MlpParams& network(const std::vector<double>& z) {
    load_phi(z);
    return net_;
  }

  bool uses_nn() const { return use_nn_; }
  bool uses_p0() const { return use_p0_; }
  bool uses_theta() const { return use_theta_; }
  const InputScaling& scaling() const { return scaling_; }

 private:
  void load_phi(const std::vector<double>& z) {
    std::copy(z.begin() + static_cast<std::ptrdiff_t>(phi_off_), z.end(), net_.values().begin());
  }

  const Dataset& data_;
  EstimatorSpec spec_;
  KnownPhysics known_;
  double d_far_;
  std::size_t dim_;
  bool use_theta_;
  bool use_p0_;
  bool use_nn_;
  InputScaling scaling_;
  std::vector<double> theta_unit_;  // meters per optimizer unit of theta
  MlpParams net_;
  std::optional<MlpBatch> batch_;
  std::vector<double> upstream_;
  std::size_t theta_off_ = 0;
  std::size_t p0_off_ = 0;
  std::size_t phi_off_ = 0;
  std::size_t size_ = 0;
};

// Argmax of the learned field over a regular grid spanning the scaled box.
Position grid_argmax(const MlpParams& net, int points) {
  const auto& s = net.scaling();
  const std::size_t dim = s.dim();
  MlpWorkspace ws(net);
  std::vector<double> u(dim);
  std::vector<int> idx(dim, 0);
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> best_u(dim, 0.0);
  const auto coord = [&](int k) { return -1.0 + 2.0 * k / static_cast<double>(points - 1); };
  for (;;) {
    for (std::size_t i = 0; i < dim; ++i) u[i] = coord(idx[i]);
    const double g = ws.forward(net, u);
    if (g > best) {
      best = g;
      best_u = u;
    }
    std::size_t i = 0;
    while (i < dim && ++idx[i] == points) idx[i++] = 0;
    if (i == dim) break;
  }
  std::vector<double> t(dim);
  for (std::size_t i = 0; i < dim; ++i) t[i] = s.center[i] + s.half_width[i] * best_u[i];
  return Position(std::move(t));
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::mle_pathloss: return "mle_pathloss";
    case EstimatorKind::apbm: return "apbm";
    case EstimatorKind::apbm_p0_blind: return "apbm_p0_blind";
    case EstimatorKind::pl_only: return "pl_only";
    case EstimatorKind::nn_only: return "nn_only";
  }
  return "unknown";
}

EstimatorKind parse_estimator_kind(std::string_view name) {
  for (auto k : {EstimatorKind::mle_pathloss, EstimatorKind::apbm, EstimatorKind::apbm_p0_blind,
                 EstimatorKind::pl_only, EstimatorKind::nn_only}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown estimator kind: " + std::string(name));
}

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::tolerance: return "tolerance";
    case StopReason::budget: return "budget";
    case StopReason::diverged: return "diverged";
    case StopReason::non_identifiable: return "non_identifiable";
  }
  return "unknown";
}

void EstimatorSpec::validate() const {
  if (epochs <= 0) throw std::invalid_argument("epochs must be > 0");
  if (!(lr > 0)) throw std::invalid_argument("learning rate must be > 0");
  if (!(lr_final_ratio > 0) || lr_final_ratio > 1) {
    throw std::invalid_argument("lr_final_ratio must be in (0, 1]");
  }
  if (n_starts < 1) throw std::invalid_argument("n_starts must be >= 1");
  if (!(beta >= 0)) throw std::invalid_argument("beta must be >= 0");
  if (grid_points < 2) throw std::invalid_argument("grid_points must be >= 2");
  if (theta_unit_m && !(*theta_unit_m > 0)) throw std::invalid_argument("theta_unit_m must be > 0");
  if (!(p0_unit_db > 0)) throw std::invalid_argument("p0_unit_db must be > 0");
  if (nn_warmup_epochs < 0) throw std::invalid_argument("nn_warmup_epochs must be >= 0");
  for (std::size_t h : hidden) {
    if (h == 0) throw std::invalid_argument("hidden layer widths must be > 0");
  }
  if (name.find_first_of(",\n\r\"") != std::string::npos) {
    throw std::invalid_argument("estimator name must not contain commas, quotes or newlines");
  }
}

std::string EstimatorSpec::label() const { return name.empty() ? std::string(to_string(kind)) : name; }

double log_likelihood(const Dataset& data, const JammerParams& jp, double d_far) {
  const double s2 = data.sigma * data.sigma;
  double ss = 0.0;
  for (const auto& o : data.observations) {
    const double r = o.y_dbw - clamped_rss(o.x, jp, d_far);
    ss += r * r;
  }
  const double n = static_cast<double>(data.size());
  return -0.5 * n * std::log(2.0 * std::numbers::pi * s2) - ss / (2.0 * s2);
}

double log_likelihood_unclamped(const Dataset& data, const JammerParams& jp) {
  const double s2 = data.sigma * data.sigma;
  double ss = 0.0;
  for (const auto& o : data.observations) {
    const double f = jp.p0_dbw - jp.gamma * 10.0 * std::log10(distance(o.x, jp.theta));
    const double r = o.y_dbw - f;
    ss += r * r;
  }
  const double n = static_cast<double>(data.size());
  return -0.5 * n * std::log(2.0 * std::numbers::pi * s2) - ss / (2.0 * s2);
}

EstimateReport mle_estimate(const Dataset& data, const KnownPhysics& known, double d_far,
                            const EstimatorSpec& spec) {
  const auto t0 = Clock::now();
  data.validate();
  spec.validate();
  const auto dim = data.observations.front().x.dim();
  const auto order = strongest_first(data);
  const double s2 = data.sigma * data.sigma;

  EstimateReport best;
  best.estimator = spec.label();
  best.final_cost = std::numeric_limits<double>::infinity();
  bool any_finite = false;

  for (int start = 0; start < spec.n_starts; ++start) {
    std::vector<double> theta =
        (start == 0 && spec.theta_init)
            ? std::vector<double>(spec.theta_init->coords().begin(), spec.theta_init->coords().end())
            : jittered_start(data, order, start, d_far, spec.seed);
    AdamState adam(dim, spec.lr);
    std::vector<double> grad(dim);
    std::vector<double> history;
    StopReason reason = StopReason::budget;
    int it = 0;
    double cost = 0.0;
    for (; it < spec.epochs; ++it) {
      const JammerParams jp{Position(theta), known.p0_dbw, known.gamma};
      cost = -log_likelihood(data, jp, d_far);
      if (!std::isfinite(cost)) {
        reason = StopReason::diverged;
        break;
      }
      history.push_back(cost);
      if (stalled(history)) {
        reason = StopReason::tolerance;
        break;
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      for (const auto& o : data.observations) {
        const double r = o.y_dbw - clamped_rss(o.x, jp, d_far);
        const auto g = clamped_rss_grad_theta(o.x, jp, d_far);
        for (std::size_t i = 0; i < dim; ++i) grad[i] -= r * g[i] / s2;
      }
      adam.lr = step_size(spec, it);
      adam_step(adam, theta, grad);
    }
    if (reason != StopReason::diverged) {
      cost = -log_likelihood(data, {Position(theta), known.p0_dbw, known.gamma}, d_far);
      if (std::isfinite(cost)) any_finite = true;
    }
    if (std::isfinite(cost) && cost < best.final_cost) {
      best.final_cost = cost;
      best.theta_hat = Position(theta);
      best.iterations = it;
      best.stop_reason = reason;
      best.cost_history = std::move(history);
    }
  }

  if (!any_finite) {
    best.converged = false;
    best.stop_reason = StopReason::diverged;
    best.final_cost = std::numeric_limits<double>::quiet_NaN();
    best.theta_hat = data.observations[order.front()].x;
    best.diagnostic = "all starts produced a non-finite likelihood";
  } else if (!identifiable(data, {best.theta_hat, known.p0_dbw, known.gamma}, d_far)) {
    best.converged = false;
    best.stop_reason = StopReason::non_identifiable;
    best.diagnostic = "Fisher information at the estimate is singular";
  } else {
    best.converged = true;
  }
  best.p0_hat = known.p0_dbw;
  best.wall_time_s = seconds_since(t0);
  return best;
}

double apbm_cost(const Dataset& data, const JammerParams& jp, const MlpParams& phi, double beta,
                 double d_far) {
  MlpWorkspace ws(phi);
  double cost = 0.0;
  for (const auto& o : data.observations) {
    const double r = o.y_dbw - clamped_rss(o.x, jp, d_far) - ws.forward(phi, o.x);
    cost += r * r;
  }
  return cost + beta * phi.squared_norm();
}

double apbm_cost(const Dataset& data, const JammerParams& jp, double d_far) {
  double cost = 0.0;
  for (const auto& o : data.observations) {
    const double r = o.y_dbw - clamped_rss(o.x, jp, d_far);
    cost += r * r;
  }
  return cost;
}

InputScaling data_scaling(const Dataset& data, double d_far) {
  const auto dim = data.observations.front().x.dim();
  std::vector<double> lo(dim, std::numeric_limits<double>::infinity());
  std::vector<double> hi(dim, -std::numeric_limits<double>::infinity());
  for (const auto& o : data.observations) {
    for (std::size_t i = 0; i < dim; ++i) {
      lo[i] = std::min(lo[i], o.x[i]);
      hi[i] = std::max(hi[i], o.x[i]);
    }
  }
  InputScaling s;
  for (std::size_t i = 0; i < dim; ++i) {
    s.center.push_back(0.5 * (lo[i] + hi[i]));
    s.half_width.push_back(std::max(0.5 * (hi[i] - lo[i]), d_far));
  }
  return s;
}

EstimateReport apbm_fit(const Dataset& data, const EstimatorSpec& spec, const KnownPhysics& known,
                        double d_far) {
  const auto t0 = Clock::now();
  data.validate();
  spec.validate();
  if (spec.kind == EstimatorKind::mle_pathloss) {
    throw std::invalid_argument("apbm_fit does not handle the pathloss MLE");
  }
  const auto order = strongest_first(data);

  EstimateReport best;
  best.estimator = spec.label();
  best.final_cost = std::numeric_limits<double>::infinity();
  std::vector<double> best_z;
  std::optional<ApbmProblem> best_problem;

  for (int start = 0; start < spec.n_starts; ++start) {
    // Starts share the network initialization so their final costs differ
    // through the fit and not through the draw of phi. Without theta the
    // network draw is the only thing a start can vary.
    EstimatorSpec run_spec = spec;
    if (spec.kind == EstimatorKind::nn_only) {
      run_spec.seed = derive_seed(spec.seed, streams::kStarts, static_cast<std::uint64_t>(start));
    }
    ApbmProblem problem(data, run_spec, known, d_far);
    const std::vector<double> theta0 =
        (start == 0 && spec.theta_init)
            ? std::vector<double>(spec.theta_init->coords().begin(), spec.theta_init->coords().end())
            : jittered_start(data, order, start, d_far, spec.seed);
    std::vector<double> z = problem.initial_vector(theta0);
    std::vector<double> grad(problem.size());
    const std::size_t n_phys = problem.physics_size();
    AdamState adam_phys(n_phys, spec.lr);
    AdamState adam_net(problem.size() - n_phys, spec.nn_lr.value_or(spec.lr));
    const double nn_ratio = spec.nn_lr.value_or(spec.lr) / spec.lr;
    std::vector<double> history;
    StopReason reason = StopReason::budget;
    std::string diagnostic;
    int it = 0;
    for (; it < spec.epochs; ++it) {
      const double cost = problem.evaluate(z, grad);
      if (!std::isfinite(cost)) {
        reason = StopReason::diverged;
        diagnostic = "non-finite cost at epoch " + std::to_string(it);
        break;
      }
      history.push_back(cost);
      if (stalled(history)) {
        reason = StopReason::tolerance;
        break;
      }
      const double lr = step_size(spec, it);
      const std::span<double> zs(z);
      const std::span<const double> gs(grad);
      if (n_phys > 0) {
        adam_phys.lr = lr;
        adam_step(adam_phys, zs.first(n_phys), gs.first(n_phys));
      }
      if (z.size() > n_phys && (n_phys == 0 || it >= spec.nn_warmup_epochs)) {
        adam_net.lr = lr * nn_ratio;
        adam_step(adam_net, zs.subspan(n_phys), gs.subspan(n_phys));
      }
    }
    double cost = std::numeric_limits<double>::quiet_NaN();
    if (reason != StopReason::diverged) {
      cost = problem.evaluate(z, {});
      if (std::isfinite(cost)) {
        history.push_back(cost);
      } else {
        reason = StopReason::diverged;
        diagnostic = "non-finite cost after the final update";
      }
    }
    const bool better = std::isfinite(cost) && cost < best.final_cost;
    if (better || (start == 0 && !std::isfinite(cost))) {
      best.final_cost = std::isfinite(cost) ? cost : best.final_cost;
      best.iterations = it;
      best.stop_reason = reason;
      best.cost_history = std::move(history);
      best.diagnostic = diagnostic;
      best_z = z;
      best_problem.emplace(std::move(problem));
    }
  }

  auto& problem = *best_problem;
  if (problem.uses_nn()) best.phi_hat = problem.network(best_z);
  if (problem.uses_theta()) {
    best.theta_hat = problem.theta_meters(best_z);
    best.p0_hat = problem.p0(best_z);
  } else {
    best.theta_hat = grid_argmax(*best.phi_hat, spec.grid_points);
  }
  best.converged = best.stop_reason == StopReason::tolerance ||
                   best.stop_reason == StopReason::budget;
  if (!best.converged) best.final_cost = std::numeric_limits<double>::quiet_NaN();
  if (best.converged && spec.kind == EstimatorKind::pl_only &&
      !identifiable(data, {best.theta_hat, known.p0_dbw, known.gamma}, d_far)) {
    best.converged = false;
    best.stop_reason = StopReason::non_identifiable;
    best.diagnostic = "Fisher information at the estimate is singular";
  }
  best.wall_time_s = seconds_since(t0);
  return best;
}

EstimateReport run_estimator(const Dataset& data, const EstimatorSpec& spec,
                             const KnownPhysics& known, double d_far) {
  if (spec.kind == EstimatorKind::mle_pathloss) return mle_estimate(data, known, d_far, spec);
  return apbm_fit(data, spec, known, d_far);
}

std::string report_to_json(const EstimateReport& r) {
  nlohmann::ordered_json j;
  j["estimator"] = r.estimator;
  j["theta_hat"] = std::vector<double>(r.theta_hat.coords().begin(), r.theta_hat.coords().end());
  j["p0_hat"] = r.p0_hat ? nlohmann::ordered_json(*r.p0_hat) : nlohmann::ordered_json(nullptr);
  j["final_cost"] = std::isfinite(r.final_cost) ? nlohmann::ordered_json(r.final_cost)
                                                 : nlohmann::ordered_json(nullptr);
  j["converged"] = r.converged;
  j["stop_reason"] = std::string(to_string(r.stop_reason));
  j["iterations"] = r.iterations;
  j["wall_time_s"] = r.wall_time_s;
  if (r.phi_hat) {
    j["phi"] = {{"layer_sizes", r.phi_hat->layer_sizes()},
                {"parameter_count", r.phi_hat->size()},
                {"squared_norm", r.phi_hat->squared_norm()}};
  }
  if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
  return j.dump(2);
}

}  // namespace jamfield
