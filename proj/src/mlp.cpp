#include "jamfield/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "jamfield/rng.hpp"

namespace jamfield {

namespace {

using RowMatrixMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstRowMatrixMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

}  // namespace

InputScaling InputScaling::identity(std::size_t dim) {
  return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
}

InputScaling InputScaling::from_box(std::span<const double> lo, std::span<const double> hi) {
  if (lo.size() != hi.size() || lo.empty()) throw std::invalid_argument("malformed scaling box");
  InputScaling s;
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (!(hi[i] > lo[i])) throw std::invalid_argument("scaling box must have positive extent");
    s.center.push_back(0.5 * (lo[i] + hi[i]));
    s.half_width.push_back(0.5 * (hi[i] - lo[i]));
  }
  return s;
}

void InputScaling::apply(const Position& x, std::span<double> out) const {
  if (x.dim() != dim()) throw DimensionMismatch("network input has wrong dimension");
  for (std::size_t i = 0; i < dim(); ++i) out[i] = (x[i] - center[i]) / half_width[i];
}

MlpParams::MlpParams(std::vector<std::size_t> layer_sizes, InputScaling scaling)
    : layers_(std::move(layer_sizes)), scaling_(std::move(scaling)) {
  if (layers_.size() < 2) throw std::invalid_argument("network needs at least two layer sizes");
  if (layers_.back() != 1) throw std::invalid_argument("network output must be scalar");
  for (auto n : layers_) {
    if (n == 0) throw std::invalid_argument("layer sizes must be positive");
  }
  if (layers_.front() != scaling_.dim()) {
    throw DimensionMismatch("input scaling does not match the input layer");
  }
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    offsets_.push_back(off);
    off += layers_[l] * layers_[l + 1] + layers_[l + 1];
  }
  values_.assign(off, 0.0);
}

std::size_t MlpParams::parameter_count(std::span<const std::size_t> layer_sizes) {
  std::size_t m = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    m += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
  }
  return m;
}

double MlpParams::squared_norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return s;
}

std::vector<std::size_t> default_layer_sizes(std::size_t input_dim) {
  return {input_dim, 200, 100, 1};
}

MlpParams init_mlp(std::vector<std::size_t> layer_sizes, InputScaling scaling, std::uint64_t seed) {
  MlpParams p(std::move(layer_sizes), std::move(scaling));
  SplitMix64 rng(seed);
  auto v = p.values();
  for (std::size_t l = 0; l < p.n_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.layer_sizes()[l]));
    const std::size_t end = l + 1 < p.n_layers() ? p.weight_offset(l + 1) : p.size();
    for (std::size_t k = p.weight_offset(l); k < end; ++k) {
      v[k] = bound * (2.0 * uniform01(rng) - 1.0);
    }
  }
  return p;
}

// ---------------------------------------------------------------------------

MlpWorkspace::MlpWorkspace(const MlpParams& params) {
  for (auto n : params.layer_sizes()) act_.emplace_back(n, 0.0);
  scaled_.resize(params.layer_sizes().front());
}

double MlpWorkspace::forward(const MlpParams& params, std::span<const double> u) {
  const auto& sizes = params.layer_sizes();
  const auto v = params.values();
  std::copy(u.begin(), u.end(), act_[0].begin());
  const std::size_t last = params.n_layers() - 1;
  for (std::size_t l = 0; l <= last; ++l) {
    const auto n_in = static_cast<Eigen::Index>(sizes[l]);
    const auto n_out = static_cast<Eigen::Index>(sizes[l + 1]);
    const ConstRowMatrixMap w(v.data() + params.weight_offset(l), n_out, n_in);
    const ConstVectorMap b(v.data() + params.bias_offset(l), n_out);
    const ConstVectorMap in(act_[l].data(), n_in);
    VectorMap out(act_[l + 1].data(), n_out);
    out.noalias() = w * in + b;
    if (l != last) out = out.array().tanh();
  }
  return act_.back()[0];
}

double MlpWorkspace::forward(const MlpParams& params, const Position& x) {
  params.scaling().apply(x, scaled_);
  return forward(params, scaled_);
}

void MlpWorkspace::backward(const MlpParams& params, double upstream, std::span<double> grad) {
  if (grad.size() != params.size()) throw std::invalid_argument("gradient buffer has wrong size");
  const auto& sizes = params.layer_sizes();
  const auto v = params.values();
  delta_.assign(1, upstream);
  for (std::size_t l = params.n_layers(); l-- > 0;) {
    const auto n_in = static_cast<Eigen::Index>(sizes[l]);
    const auto n_out = static_cast<Eigen::Index>(sizes[l + 1]);
    const ConstRowMatrixMap w(v.data() + params.weight_offset(l), n_out, n_in);
    RowMatrixMap gw(grad.data() + params.weight_offset(l), n_out, n_in);
    VectorMap gb(grad.data() + params.bias_offset(l), n_out);
    const ConstVectorMap in(act_[l].data(), n_in);
    const ConstVectorMap d(delta_.data(), n_out);
    gb += d;
    gw.noalias() += d * in.transpose();
    if (l == 0) break;
    delta_prev_.resize(static_cast<std::size_t>(n_in));
    VectorMap prev(delta_prev_.data(), n_in);
    prev.noalias() = w.transpose() * d;
    prev.array() *= 1.0 - in.array().square();
    delta_.swap(delta_prev_);
  }
}

MlpBatch::MlpBatch(const MlpParams& params, const std::vector<std::vector<double>>& inputs) {
  const auto& sizes = params.layer_sizes();
  const auto n = static_cast<Eigen::Index>(inputs.size());
  if (n == 0) throw std::invalid_argument("empty network batch");
  for (auto k : sizes) act_.emplace_back(static_cast<Eigen::Index>(k), n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto& u = inputs[static_cast<std::size_t>(c)];
    if (u.size() != sizes.front()) throw DimensionMismatch("batch input has wrong dimension");
    for (Eigen::Index r = 0; r < act_[0].rows(); ++r) act_[0](r, c) = u[static_cast<std::size_t>(r)];
  }
}

std::span<const double> MlpBatch::forward(const MlpParams& params) {
  const auto& sizes = params.layer_sizes();
  const auto v = params.values();
  const std::size_t last = params.n_layers() - 1;
  for (std::size_t l = 0; l <= last; ++l) {
    const auto n_in = static_cast<Eigen::Index>(sizes[l]);
    const auto n_out = static_cast<Eigen::Index>(sizes[l + 1]);
    const ConstRowMatrixMap w(v.data() + params.weight_offset(l), n_out, n_in);
    const ConstVectorMap b(v.data() + params.bias_offset(l), n_out);
    auto& out = act_[l + 1];
    out.noalias() = w * act_[l];
    out.colwise() += b;
    if (l != last) out = out.array().tanh();
  }
  return {act_.back().data(), static_cast<std::size_t>(act_.back().cols())};
}

void MlpBatch::backward(const MlpParams& params, std::span<const double> upstream,
                        std::span<double> grad) {
  if (grad.size() != params.size()) throw std::invalid_argument("gradient buffer has wrong size");
  if (upstream.size() != batch_size()) throw std::invalid_argument("upstream has wrong batch size");
  const auto& sizes = params.layer_sizes();
  const auto v = params.values();
  delta_ = Eigen::Map<const Eigen::RowVectorXd>(upstream.data(), static_cast<Eigen::Index>(upstream.size()));
  for (std::size_t l = params.n_layers(); l-- > 0;) {
    const auto n_in = static_cast<Eigen::Index>(sizes[l]);
    const auto n_out = static_cast<Eigen::Index>(sizes[l + 1]);
    const ConstRowMatrixMap w(v.data() + params.weight_offset(l), n_out, n_in);
    RowMatrixMap gw(grad.data() + params.weight_offset(l), n_out, n_in);
    VectorMap gb(grad.data() + params.bias_offset(l), n_out);
    gw.noalias() += delta_ * act_[l].transpose();
    gb += delta_.rowwise().sum();
    if (l == 0) break;
    delta_prev_.noalias() = w.transpose() * delta_;
    delta_prev_.array() *= 1.0 - act_[l].array().square();
    delta_.swap(delta_prev_);
  }
}

double mlp_forward(const MlpParams& params, const Position& x) {
  MlpWorkspace ws(params);
  return ws.forward(params, x);
}

std::vector<double> mlp_gradient(const MlpParams& params, const Position& x, double upstream) {
  MlpWorkspace ws(params);
  ws.forward(params, x);
  std::vector<double> g(params.size(), 0.0);
  ws.backward(params, upstream, g);
  return g;
}

double mlp_lipschitz_bound(const MlpParams& params) {
  const auto v = params.values();
  double bound = 1.0;
  for (std::size_t l = 0; l < params.n_layers(); ++l) {
    double s = 0.0;
    for (std::size_t k = params.weight_offset(l); k < params.bias_offset(l); ++k) s += v[k] * v[k];
    bound *= std::sqrt(s);
  }
  double min_half = params.scaling().half_width.front();
  for (double h : params.scaling().half_width) min_half = std::min(min_half, h);
  return bound / min_half;
}

// ---------------------------------------------------------------------------

void write_mlp(std::ostream& os, const MlpParams& params) {
  const auto old_prec = os.precision(17);
  os << "jamfield-mlp 1\n";
  os << "layers " << params.layer_sizes().size();
  for (auto n : params.layer_sizes()) os << ' ' << n;
  os << "\nscaling " << params.scaling().dim();
  for (double c : params.scaling().center) os << ' ' << c;
  for (double h : params.scaling().half_width) os << ' ' << h;
  os << "\nparams " << params.size() << '\n';
  for (double v : params.values()) os << v << '\n';
  os.precision(old_prec);
}

MlpParams read_mlp(std::istream& is) {
  const auto expect = [&](const char* word) {
    std::string tok;
    if (!(is >> tok) || tok != word) {
      throw std::runtime_error(std::string("malformed network file: expected '") + word + "'");
    }
  };
  expect("jamfield-mlp");
  int version = 0;
  if (!(is >> version) || version != 1) throw std::runtime_error("unsupported network file version");
  expect("layers");
  std::size_t n_layers = 0;
  is >> n_layers;
  std::vector<std::size_t> layers(n_layers);
  for (auto& n : layers) is >> n;
  expect("scaling");
  std::size_t dim = 0;
  is >> dim;
  InputScaling s{std::vector<double>(dim), std::vector<double>(dim)};
  for (auto& c : s.center) is >> c;
  for (auto& h : s.half_width) is >> h;
  expect("params");
  std::size_t m = 0;
  is >> m;
  if (!is) throw std::runtime_error("malformed network file header");
  MlpParams p(std::move(layers), std::move(s));
  if (m != p.size()) throw std::runtime_error("parameter count does not match layer sizes");
  for (double& v : p.values()) {
    if (!(is >> v)) throw std::runtime_error("network file truncated");
  }
  return p;
}

// ---------------------------------------------------------------------------

AdamState::AdamState(std::size_t n, double lr_) : first_moment(n, 0.0), second_moment(n, 0.0), lr(lr_) {}

void adam_step(AdamState& s, std::span<double> params, std::span<const double> grad) {
  if (params.size() != grad.size() || params.size() != s.first_moment.size() ||
      params.size() != s.second_moment.size()) {
    throw std::invalid_argument("Adam: parameter, gradient and moment lengths differ");
  }
  ++s.step_count;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step_count));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    s.first_moment[i] = s.beta1 * s.first_moment[i] + (1.0 - s.beta1) * g;
    s.second_moment[i] = s.beta2 * s.second_moment[i] + (1.0 - s.beta2) * g * g;
    const double m_hat = s.first_moment[i] / c1;
    const double v_hat = s.second_moment[i] / c2;
    params[i] -= s.lr * m_hat / (std::sqrt(v_hat) + s.eps);
  }
}

}  // namespace jamfield
