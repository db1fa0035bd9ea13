#pragma once

// Small dense networks with hand-written reverse-mode gradients. Samples are
// stored as matrix columns throughout: an input batch is (in x B).

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace evcs::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

struct DenseLayer {
  Matrix weight;  // fan_out x fan_in
  Vector bias;    // fan_out
};

// Per-layer activations kept by a forward pass for the backward pass.
struct Tape {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre_activations;
};

struct Gradients {
  std::vector<DenseLayer> layers;

  Gradients& operator*=(double k) {
    for (auto& l : layers) {
      l.weight *= k;
      l.bias *= k;
    }
    return *this;
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    for (const auto& l : layers) {
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out.push_back(l.weight(r, c));
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) out.push_back(l.bias(r));
    }
    return out;
  }
};

// Rectifier on hidden layers, linear output.
class Mlp {
 public:
  Mlp() = default;

  explicit Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw std::invalid_argument("Mlp needs at least input and output sizes");
    for (int s : sizes_)
      if (s <= 0) throw std::invalid_argument("Mlp layer sizes must be positive");
    for (std::size_t i = 0; i + 1 < sizes_.size(); ++i)
      layers_.push_back({Matrix::Zero(sizes_[i + 1], sizes_[i]), Vector::Zero(sizes_[i + 1])});
  }

  // Fan-in scaled uniform initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  template <class Rng>
  Mlp(std::vector<int> sizes, Rng& rng) : Mlp(std::move(sizes)) {
    for (auto& l : layers_) {
      double bound = 1.0 / std::sqrt(static_cast<double>(l.weight.cols()));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = u(rng);
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = u(rng);
    }
  }

  const std::vector<int>& sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < sizes_.size(); ++i)
      n += static_cast<std::size_t>(sizes_[i] + 1) * static_cast<std::size_t>(sizes_[i + 1]);
    return n;
  }

  Matrix forward(const Matrix& x) const { return run(x, nullptr); }
  Matrix forward(const Matrix& x, Tape& tape) const { return run(x, &tape); }

  Vector forward(const Vector& x) const {
    Matrix col = x;
    return run(col, nullptr).col(0);
  }

  // Gradients of a loss given dL/d(output) for every column. If
  // `input_grad` is set it receives dL/d(input).
  Gradients backward(const Tape& tape, const Matrix& output_grad, Matrix* input_grad = nullptr) const {
    Gradients g;
    g.layers.resize(layers_.size());
    Matrix delta = output_grad;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      if (i + 1 < layers_.size())
        delta = delta.cwiseProduct((tape.pre_activations[i].array() > 0.0).cast<double>().matrix());
      g.layers[i].weight = delta * tape.inputs[i].transpose();
      g.layers[i].bias = delta.rowwise().sum();
      if (i > 0 || input_grad) {
        Matrix upstream = layers_[i].weight.transpose() * delta;
        if (i == 0)
          *input_grad = std::move(upstream);
        else
          delta = std::move(upstream);
      }
    }
    return g;
  }

  std::vector<double> flatten() const {
    Gradients view{layers_};
    return view.flatten();
  }

  void assign(const std::vector<double>& flat) {
    if (flat.size() != parameter_count()) throw std::invalid_argument("assign: parameter count mismatch");
    std::size_t k = 0;
    for (auto& l : layers_) {
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = flat[k++];
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = flat[k++];
    }
  }

  bool all_finite() const {
    for (const auto& l : layers_)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

 private:
  Matrix run(const Matrix& x, Tape* tape) const {
    if (x.rows() != input_size())
      throw std::invalid_argument("Mlp::forward: expected " + std::to_string(input_size()) + " inputs, got " +
                                  std::to_string(x.rows()));
    if (tape) {
      tape->inputs.clear();
      tape->pre_activations.clear();
    }
    Matrix h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      Matrix z = layers_[i].weight * h;
      z.colwise() += layers_[i].bias;
      if (tape) {
        tape->inputs.push_back(h);
        tape->pre_activations.push_back(z);
      }
      h = (i + 1 < layers_.size()) ? Matrix(z.cwiseMax(0.0)) : z;
    }
    return h;
  }

  std::vector<int> sizes_;
  std::vector<DenseLayer> layers_;
};

// Mean loss over the batch and its gradient. `loss` maps the network output
// (out x B) to {mean loss, dL/d(output)}.
template <class Loss>
std::pair<double, Gradients> loss_gradient(const Mlp& net, const Matrix& batch, Loss&& loss) {
  Tape tape;
  Matrix out = net.forward(batch, tape);
  auto [value, dout] = loss(out);
  return {value, net.backward(tape, dout)};
}

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adaptive-moment optimizer with bias correction.
class Adam {
 public:
  Adam() = default;
  Adam(const Mlp& net, AdamConfig cfg) : cfg_(cfg) {
    for (const auto& l : net.layers()) {
      m_.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
      v_.push_back(m_.back());
    }
  }

  const AdamConfig& config() const { return cfg_; }
  long steps() const { return t_; }

  void step(Mlp& net, const Gradients& g) {
    if (g.layers.size() != m_.size()) throw std::invalid_argument("Adam::step: layer count mismatch");
    ++t_;
    double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * grad;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
      param.array() -= cfg_.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.epsilon);
    };
    for (std::size_t i = 0; i < m_.size(); ++i) {
      auto& l = net.layers()[i];
      update(l.weight, g.layers[i].weight, m_[i].weight, v_[i].weight);
      update(l.bias, g.layers[i].bias, m_[i].bias, v_[i].bias);
    }
  }

 private:
  AdamConfig cfg_;
  std::vector<DenseLayer> m_;
  std::vector<DenseLayer> v_;
  long t_ = 0;
};

// target <- tau * online + (1 - tau) * target
inline void polyak_update(Mlp& target, const Mlp& online, double tau) {
  if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("polyak_update: tau outside [0, 1]");
  if (target.sizes() != online.sizes()) throw std::invalid_argument("polyak_update: shape mismatch");
  for (std::size_t i = 0; i < target.layers().size(); ++i) {
    auto& t = target.layers()[i];
    const auto& o = online.layers()[i];
    t.weight = tau * o.weight + (1.0 - tau) * t.weight;
    t.bias = tau * o.bias + (1.0 - tau) * t.bias;
  }
}

// ---------------------------------------------------------------------------
// Squashed Gaussian policy head. The network emits (mean; log_std) stacked
// into 2*dim rows; actions are tanh(mean + std * eps).

inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// log(1 - tanh(u)^2), stable for large |u|.
inline double log_one_minus_tanh_sq(double u) { return 2.0 * (std::numbers::ln2 - u - softplus(-2.0 * u)); }

inline constexpr double kSquashLimit = 1.0 - 1e-12;

struct PolicyHead {
  int dim = 3;
  double log_std_min = -20.0;
  double log_std_max = 2.0;
};

struct PolicySample {
  Matrix action;       // dim x B, in (-1, 1)
  Vector log_prob;     // B
  Matrix noise;        // eps
  Matrix pre_squash;   // u
  Matrix std_dev;      // exp(clamped log_std)
  Matrix log_std_raw;  // before clamping
};

inline Matrix squash(const Matrix& u) {
  return u.unaryExpr([](double x) { return std::clamp(std::tanh(x), -kSquashLimit, kSquashLimit); });
}

inline Matrix policy_mean_action(const PolicyHead& head, const Matrix& head_out) {
  return squash(head_out.topRows(head.dim));
}

// Reparameterized sample for externally supplied standard-normal noise.
inline PolicySample policy_sample(const PolicyHead& head, const Matrix& head_out, const Matrix& noise) {
  const int d = head.dim;
  if (head_out.rows() != 2 * d) throw std::invalid_argument("policy head expects 2*dim outputs");
  PolicySample s;
  s.noise = noise;
  s.log_std_raw = head_out.bottomRows(d);
  Matrix log_std = s.log_std_raw.cwiseMax(head.log_std_min).cwiseMin(head.log_std_max);
  s.std_dev = log_std.array().exp();
  s.pre_squash = head_out.topRows(d) + s.std_dev.cwiseProduct(noise);
  s.action = squash(s.pre_squash);
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  s.log_prob = Vector::Zero(head_out.cols());
  for (Eigen::Index b = 0; b < head_out.cols(); ++b) {
    double lp = 0.0;
    for (int i = 0; i < d; ++i) {
      double e = noise(i, b);
      lp += -0.5 * e * e - log_std(i, b) - half_log_2pi - log_one_minus_tanh_sq(s.pre_squash(i, b));
    }
    s.log_prob(b) = lp;
  }
  return s;
}

template <std::uniform_random_bit_generator Rng>
PolicySample policy_sample(const PolicyHead& head, const Matrix& head_out, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix noise(head.dim, head_out.cols());
  for (Eigen::Index b = 0; b < noise.cols(); ++b)
    for (Eigen::Index i = 0; i < noise.rows(); ++i) noise(i, b) = normal(rng);
  return policy_sample(head, head_out, noise);
}

// Density of a given squashed action under the head's output for one state.
inline double policy_log_prob(const PolicyHead& head, const Vector& head_out, const Vector& action) {
  const int d = head.dim;
  double lp = 0.0;
  for (int i = 0; i < d; ++i) {
    double ls = std::clamp(head_out(d + i), head.log_std_min, head.log_std_max);
    double u = std::atanh(action(i));
    double z = (u - head_out(i)) / std::exp(ls);
    lp += -0.5 * z * z - ls - 0.5 * std::log(2.0 * std::numbers::pi) - log_one_minus_tanh_sq(u);
  }
  return lp;
}

// Gradient w.r.t. the head output of a loss depending on the sampled action
// (dL/da, dim x B) and its log-probability (dL/dlogp, B), noise held fixed.
inline Matrix policy_backward(const PolicyHead& head, const PolicySample& s, const Matrix& action_grad,
                              const Vector& log_prob_grad) {
  const int d = head.dim;
  const Eigen::Index batch = s.action.cols();
  Matrix g(2 * d, batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int i = 0; i < d; ++i) {
      double a = std::tanh(s.pre_squash(i, b));
      double du = action_grad(i, b) * (1.0 - a * a) + log_prob_grad(b) * 2.0 * a;
      g(i, b) = du;
      double raw = s.log_std_raw(i, b);
      bool active = raw > head.log_std_min && raw < head.log_std_max;
      g(d + i, b) = active ? du * s.std_dev(i, b) * s.noise(i, b) - log_prob_grad(b) : 0.0;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Checkpoint text format:
//   evcs-mlp 1
//   sizes <n> <s0> <s1> ... <s_{n-1}>
//   then per layer: fan_out rows of fan_in weights, then one row of fan_out biases
// Values are printed with 17 significant digits so they round-trip exactly.

inline void save_mlp(std::ostream& out, const Mlp& net) {
  out << "evcs-mlp 1\nsizes " << net.sizes().size();
  for (int s : net.sizes()) out << ' ' << s;
  out << '\n';
  std::ostringstream buf;
  buf.precision(17);
  for (const auto& l : net.layers()) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) buf << (c ? " " : "") << l.weight(r, c);
      buf << '\n';
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) buf << (r ? " " : "") << l.bias(r);
    buf << '\n';
  }
  out << buf.str();
}

inline Mlp load_mlp(std::istream& in) {
  std::string magic, key;
  int version = 0;
  std::size_t n = 0;
  if (!(in >> magic >> version) || magic != "evcs-mlp" || version != 1)
    throw std::runtime_error("checkpoint: bad header");
  if (!(in >> key >> n) || key != "sizes" || n < 2 || n > 64) throw std::runtime_error("checkpoint: bad sizes line");
  std::vector<int> sizes(n);
  for (auto& s : sizes)
    if (!(in >> s) || s <= 0 || s > 1 << 16) throw std::runtime_error("checkpoint: bad layer size");
  Mlp net(sizes);
  std::vector<double> flat(net.parameter_count());
  for (auto& v : flat)
    if (!(in >> v)) throw std::runtime_error("checkpoint: truncated parameter data");
  net.assign(flat);
  if (!net.all_finite()) throw std::runtime_error("checkpoint: non-finite parameters");
  return net;
}

}  // namespace evcs::nn
