#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace pnact {

// Output transform of the final layer.
//  - linear: raw affine outputs (critics).
//  - softmax: a probability vector over discrete actions.
//  - squashed_gaussian: tanh of the affine outputs as the action mean, with
//    a state-independent learnable log standard deviation per dimension,
//    clamped to [-5, 1].
enum class Head { linear, softmax, squashed_gaussian };

Head head_from_string(const std::string& s);
std::string head_to_string(Head h);

// Parameter-shaped gradient accumulator. Layout mirrors Mlp: weights[l] is
// the row-major (out x in) matrix of layer l.
struct MlpGradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
  std::vector<double> log_std;

  void add_scaled(const MlpGradients& other, double coeff);
  void scale(double coeff);
  double max_abs() const;
};

// Activations recorded by a forward pass, consumed by backward().
struct MlpTrace {
  std::vector<double> input;
  // post[l] is the activation vector after layer l (tanh for hidden layers,
  // raw affine for the last).
  std::vector<std::vector<double>> post;
  // Head output (softmax probabilities / squashed mean / raw copy).
  std::vector<double> output;
};

// Adam moments; one slot per parameter tensor in Mlp layout.
struct AdamState {
  MlpGradients m;
  MlpGradients v;
  long step = 0;
};

// Fully connected network with tanh hidden activations and one of the three
// heads above. Forward/backward are hand-rolled so every gradient the
// trainers consume is explicit and checkable against finite differences.
// Instances are single-owner while being trained; copies are cheap and a
// copy can be evaluated concurrently with training the original.
class Mlp {
 public:
  // layer_sizes = {input, hidden..., output}. Weights get an orthogonalized
  // random init scaled per layer (policy heads start near-uniform), biases
  // start at zero; everything is drawn from `seed` deterministically.
  Mlp(std::vector<int> layer_sizes, Head head, std::uint64_t seed);

  const std::vector<int>& layer_sizes() const { return layer_sizes_; }
  Head head() const { return head_; }
  int input_dim() const { return layer_sizes_.front(); }
  int output_dim() const { return layer_sizes_.back(); }

  // Deterministic head output for one input vector.
  std::vector<double> forward(std::span<const double> input) const;
  // Forward pass that records activations for backward().
  MlpTrace trace(std::span<const double> input) const;
  // Backpropagates dLoss/d(head output) through the head transform and all
  // layers. The returned log_std slots are zero: losses that differentiate
  // the log-std do so directly (it does not pass through the network).
  MlpGradients backward(const MlpTrace& t,
                        std::span<const double> d_output) const;

  MlpGradients zero_gradients() const;
  AdamState make_adam_state() const;
  // One Adam update (beta1 0.9, beta2 0.999, eps 1e-8); log-std entries are
  // re-clamped to [-5, 1] after the step.
  void adam_step(const MlpGradients& g, AdamState& state, double lr);

  // Clamped log standard deviations (squashed_gaussian head only; empty
  // otherwise).
  const std::vector<double>& log_std() const { return log_std_; }
  std::vector<double>& mutable_log_std() { return log_std_; }

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static Mlp load(const std::string& path);

  static constexpr double kLogStdMin = -5.0;
  static constexpr double kLogStdMax = 1.0;

 private:
  Mlp() = default;
  std::vector<int> layer_sizes_;
  Head head_ = Head::linear;
  // weights_[l]: row-major (layer_sizes_[l+1] x layer_sizes_[l]).
  std::vector<std::vector<double>> weights_;
  std::vector<std::vector<double>> biases_;
  std::vector<double> log_std_;
};

}  // namespace pnact
