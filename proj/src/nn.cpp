#include "pnact/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "pnact/rng.hpp"

namespace pnact {

Head head_from_string(const std::string& s) {
  if (s == "linear") return Head::linear;
  if (s == "softmax") return Head::softmax;
  if (s == "squashed_gaussian") return Head::squashed_gaussian;
  throw std::invalid_argument("unknown head kind: " + s);
}

std::string head_to_string(Head h) {
  switch (h) {
    case Head::linear: return "linear";
    case Head::softmax: return "softmax";
    case Head::squashed_gaussian: return "squashed_gaussian";
  }
  throw std::logic_error("unreachable head kind");
}

void MlpGradients::add_scaled(const MlpGradients& other, double coeff) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (std::size_t i = 0; i < weights[l].size(); ++i)
      weights[l][i] += coeff * other.weights[l][i];
    for (std::size_t i = 0; i < biases[l].size(); ++i)
      biases[l][i] += coeff * other.biases[l][i];
  }
  for (std::size_t i = 0; i < log_std.size(); ++i)
    log_std[i] += coeff * other.log_std[i];
}

void MlpGradients::scale(double coeff) {
  for (auto& w : weights)
    for (double& x : w) x *= coeff;
  for (auto& b : biases)
    for (double& x : b) x *= coeff;
  for (double& x : log_std) x *= coeff;
}

double MlpGradients::max_abs() const {
  double m = 0.0;
  for (const auto& w : weights)
    for (double x : w) m = std::max(m, std::abs(x));
  for (const auto& b : biases)
    for (double x : b) m = std::max(m, std::abs(x));
  for (double x : log_std) m = std::max(m, std::abs(x));
  return m;
}

namespace {

// Draws a Gaussian (rows x cols) matrix, orthogonalizes the rows with
// Gram-Schmidt where possible, and scales by `gain`. Degenerate rows (rare)
// keep their raw Gaussian draw.
std::vector<double> init_matrix(int rows, int cols, double gain, Rng& rng) {
  std::vector<double> w(static_cast<std::size_t>(rows) * cols);
  for (double& x : w) x = rng.normal();
  const int ortho_rows = std::min(rows, cols);
  for (int i = 0; i < ortho_rows; ++i) {
    double* ri = &w[static_cast<std::size_t>(i) * cols];
    for (int j = 0; j < i; ++j) {
      const double* rj = &w[static_cast<std::size_t>(j) * cols];
      double dot = 0.0;
      for (int k = 0; k < cols; ++k) dot += ri[k] * rj[k];
      for (int k = 0; k < cols; ++k) ri[k] -= dot * rj[k];
    }
    double norm = 0.0;
    for (int k = 0; k < cols; ++k) norm += ri[k] * ri[k];
    norm = std::sqrt(norm);
    if (norm > 1e-8)
      for (int k = 0; k < cols; ++k) ri[k] /= norm;
  }
  for (double& x : w) x *= gain;
  return w;
}

}  // namespace

Mlp::Mlp(std::vector<int> layer_sizes, Head head, std::uint64_t seed)
    : layer_sizes_(std::move(layer_sizes)), head_(head) {
  if (layer_sizes_.size() < 2)
    throw std::invalid_argument("Mlp needs at least input and output sizes");
  for (int n : layer_sizes_)
    if (n <= 0) throw std::invalid_argument("Mlp layer sizes must be positive");
  Rng rng(seed);
  const std::size_t layers = layer_sizes_.size() - 1;
  weights_.resize(layers);
  biases_.resize(layers);
  const bool policy_head = head_ != Head::linear;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = layer_sizes_[l];
    const int out = layer_sizes_[l + 1];
    const bool last = l + 1 == layers;
    const double gain = last ? (policy_head ? 0.01 : 1.0) : std::sqrt(2.0);
    weights_[l] = init_matrix(out, in, gain, rng);
    biases_[l].assign(static_cast<std::size_t>(out), 0.0);
  }
  if (head_ == Head::squashed_gaussian)
    log_std_.assign(static_cast<std::size_t>(layer_sizes_.back()), -0.5);
}

namespace {

void affine(const std::vector<double>& w, const std::vector<double>& b,
            std::span<const double> in, std::vector<double>& out) {
  const std::size_t rows = b.size();
  const std::size_t cols = in.size();
  out.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    double acc = b[i];
    const double* row = &w[i * cols];
    for (std::size_t k = 0; k < cols; ++k) acc += row[k] * in[k];
    out[i] = acc;
  }
}

std::vector<double> apply_head(Head head, const std::vector<double>& z) {
  switch (head) {
    case Head::linear:
      return z;
    case Head::softmax: {
      double zmax = *std::max_element(z.begin(), z.end());
      std::vector<double> p(z.size());
      double total = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - zmax);
        total += p[i];
      }
      for (double& x : p) x /= total;
      return p;
    }
    case Head::squashed_gaussian: {
      std::vector<double> m(z.size());
      for (std::size_t i = 0; i < z.size(); ++i) m[i] = std::tanh(z[i]);
      return m;
    }
  }
  throw std::logic_error("unreachable head kind");
}

}  // namespace

std::vector<double> Mlp::forward(std::span<const double> input) const {
  if (static_cast<int>(input.size()) != input_dim())
    throw std::invalid_argument("Mlp::forward: input has size " +
                                std::to_string(input.size()) + ", expected " +
                                std::to_string(input_dim()));
  std::vector<double> cur(input.begin(), input.end());
  std::vector<double> next;
  for (std::size_t l = 0; l + 1 < weights_.size(); ++l) {
    affine(weights_[l], biases_[l], cur, next);
    for (double& x : next) x = std::tanh(x);
    cur.swap(next);
  }
  affine(weights_.back(), biases_.back(), cur, next);
  return apply_head(head_, next);
}

MlpTrace Mlp::trace(std::span<const double> input) const {
  if (static_cast<int>(input.size()) != input_dim())
    throw std::invalid_argument("Mlp::trace: input has size " +
                                std::to_string(input.size()) + ", expected " +
                                std::to_string(input_dim()));
  MlpTrace t;
  t.input.assign(input.begin(), input.end());
  t.post.resize(weights_.size());
  std::span<const double> cur(t.input);
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    affine(weights_[l], biases_[l], cur, t.post[l]);
    if (l + 1 < weights_.size())
      for (double& x : t.post[l]) x = std::tanh(x);
    cur = t.post[l];
  }
  t.output = apply_head(head_, t.post.back());
  return t;
}

MlpGradients Mlp::backward(const MlpTrace& t,
                           std::span<const double> d_output) const {
  if (static_cast<int>(d_output.size()) != output_dim())
    throw std::invalid_argument("Mlp::backward: gradient has size " +
                                std::to_string(d_output.size()) +
                                ", expected " + std::to_string(output_dim()));
  MlpGradients g = zero_gradients();
  // Pull the head-output gradient back to the final affine outputs.
  std::vector<double> dz(d_output.begin(), d_output.end());
  switch (head_) {
    case Head::linear:
      break;
    case Head::softmax: {
      const std::vector<double>& p = t.output;
      double inner = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) inner += p[i] * dz[i];
      for (std::size_t i = 0; i < p.size(); ++i)
        dz[i] = p[i] * (dz[i] - inner);
      break;
    }
    case Head::squashed_gaussian: {
      const std::vector<double>& m = t.output;
      for (std::size_t i = 0; i < m.size(); ++i) dz[i] *= 1.0 - m[i] * m[i];
      break;
    }
  }
  for (std::size_t li = weights_.size(); li-- > 0;) {
    std::span<const double> in =
        li == 0 ? std::span<const double>(t.input)
                : std::span<const double>(t.post[li - 1]);
    const std::size_t rows = biases_[li].size();
    const std::size_t cols = in.size();
    for (std::size_t i = 0; i < rows; ++i) {
      g.biases[li][i] += dz[i];
      double* grow = &g.weights[li][i * cols];
      for (std::size_t k = 0; k < cols; ++k) grow[k] += dz[i] * in[k];
    }
    if (li == 0) break;
    std::vector<double> dprev(cols, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
      const double* wrow = &weights_[li][i * cols];
      for (std::size_t k = 0; k < cols; ++k) dprev[k] += dz[i] * wrow[k];
    }
    // t.post[li-1] holds tanh activations for every non-final layer.
    for (std::size_t k = 0; k < cols; ++k) {
      const double a = t.post[li - 1][k];
      dprev[k] *= 1.0 - a * a;
    }
    dz.swap(dprev);
  }
  return g;
}

MlpGradients Mlp::zero_gradients() const {
  MlpGradients g;
  g.weights.resize(weights_.size());
  g.biases.resize(biases_.size());
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    g.weights[l].assign(weights_[l].size(), 0.0);
    g.biases[l].assign(biases_[l].size(), 0.0);
  }
  g.log_std.assign(log_std_.size(), 0.0);
  return g;
}

AdamState Mlp::make_adam_state() const {
  AdamState s;
  s.m = zero_gradients();
  s.v = zero_gradients();
  s.step = 0;
  return s;
}

namespace {

void adam_update(std::vector<double>& param, const std::vector<double>& grad,
                 std::vector<double>& m, std::vector<double>& v, double lr,
                 double bc1, double bc2) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * grad[i];
    v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * grad[i] * grad[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    param[i] -= lr * mhat / (std::sqrt(vhat) + kEps);
  }
}

}  // namespace

void Mlp::adam_step(const MlpGradients& g, AdamState& state, double lr) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(state.step));
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    adam_update(weights_[l], g.weights[l], state.m.weights[l],
                state.v.weights[l], lr, bc1, bc2);
    adam_update(biases_[l], g.biases[l], state.m.biases[l], state.v.biases[l],
                lr, bc1, bc2);
  }
  if (!log_std_.empty()) {
    adam_update(log_std_, g.log_std, state.m.log_std, state.v.log_std, lr, bc1,
                bc2);
    for (double& x : log_std_)
      x = std::clamp(x, kLogStdMin, kLogStdMax);
  }
}

nlohmann::json Mlp::to_json() const {
  nlohmann::json j;
  j["layer_sizes"] = layer_sizes_;
  j["head"] = head_to_string(head_);
  j["weights"] = weights_;
  j["biases"] = biases_;
  j["log_std"] = log_std_;
  return j;
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  Mlp net;
  net.layer_sizes_ = j.at("layer_sizes").get<std::vector<int>>();
  net.head_ = head_from_string(j.at("head").get<std::string>());
  net.weights_ = j.at("weights").get<std::vector<std::vector<double>>>();
  net.biases_ = j.at("biases").get<std::vector<std::vector<double>>>();
  net.log_std_ = j.at("log_std").get<std::vector<double>>();
  if (net.layer_sizes_.size() < 2)
    throw std::invalid_argument("checkpoint: layer_sizes too short");
  const std::size_t layers = net.layer_sizes_.size() - 1;
  if (net.weights_.size() != layers || net.biases_.size() != layers)
    throw std::invalid_argument("checkpoint: layer count mismatch");
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = static_cast<std::size_t>(net.layer_sizes_[l]);
    const std::size_t out = static_cast<std::size_t>(net.layer_sizes_[l + 1]);
    if (net.weights_[l].size() != in * out || net.biases_[l].size() != out)
      throw std::invalid_argument("checkpoint: tensor shape mismatch at layer " +
                                  std::to_string(l));
  }
  if (net.head_ == Head::squashed_gaussian) {
    if (net.log_std_.size() !=
        static_cast<std::size_t>(net.layer_sizes_.back()))
      throw std::invalid_argument("checkpoint: log_std size mismatch");
  } else if (!net.log_std_.empty()) {
    throw std::invalid_argument("checkpoint: log_std present for non-gaussian head");
  }
  return net;
}

void Mlp::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << to_json().dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

Mlp Mlp::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  nlohmann::json j;
  in >> j;
  return from_json(j);
}

}  // namespace pnact
