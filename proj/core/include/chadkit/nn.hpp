#pragma once

// Minimal dense-network substrate: affine layers with tanh/sigmoid/identity
// activations, inverted dropout, MSE/BCE losses, Adam and a finite
// difference gradient checker. Everything is double precision and batched
// column-wise: a batch of B vectors of size n is an n x B matrix.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chadkit/rng.hpp"

namespace chadkit::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { identity, tanh, sigmoid };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

// Writable and read-only flat views over a parameter tensor's storage.
using ParamSpan = std::span<double>;
using ConstParamSpan = std::span<const double>;
using ParamList = std::vector<ParamSpan>;
using ConstParamList = std::vector<ConstParamSpan>;

inline ParamSpan as_span(Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
inline ParamSpan as_span(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
inline ConstParamSpan as_const_span(const Matrix& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}
inline ConstParamSpan as_const_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// Symmetric uniform init in +-sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Matrix& weights, Rng& rng);

struct DenseGrad {
  Matrix weights;
  Vector bias;

  void zero();
};

// y = activation(W x + b). Weights are [out x in].
struct DenseLayer {
  Matrix weights;
  Vector bias;
  Activation activation = Activation::identity;

  DenseLayer() = default;
  DenseLayer(Eigen::Index in_dim, Eigen::Index out_dim, Activation act);

  Eigen::Index in_dim() const { return weights.cols(); }
  Eigen::Index out_dim() const { return weights.rows(); }

  Vector forward(const Vector& input) const;
  Matrix forward(const Matrix& input) const;

  // Given the forward input/output and dL/d(output), accumulates dL/dW and
  // dL/db into grad and returns dL/d(input). The activation derivative is
  // recovered from the cached output.
  Matrix backward(const Matrix& input, const Matrix& output,
                  const Matrix& d_output, DenseGrad& grad) const;

  DenseGrad make_grad() const;
};

// Applies the activation in place.
void activate(Matrix& m, Activation a);

// Mask with entries 0 or 1/(1-rate); rate 0 yields all ones.
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng);

struct MlpGrad {
  std::vector<DenseGrad> layers;

  void zero();
  ParamList params();
  ConstParamList params() const;
};

// Stack of dense layers. Hidden layers share one activation; dropout is
// applied after every hidden activation (never after the output layer).
class Mlp {
 public:
  struct Tape {
    std::vector<Matrix> inputs;   // input seen by layer i (post-dropout)
    std::vector<Matrix> outputs;  // activation output of layer i (pre-dropout)
    std::vector<Matrix> masks;    // dropout mask after hidden layer i
  };

  Mlp() = default;
  Mlp(Eigen::Index in_dim, const std::vector<int>& sizes, Activation hidden,
      Activation output, double dropout_rate);

  // Forward pass. When dropout_rng is null the network runs in inference
  // mode. The tape is filled when non-null.
  Matrix forward(const Matrix& input, Tape* tape = nullptr,
                 Rng* dropout_rng = nullptr) const;

  // Accumulates parameter gradients and returns dL/d(input).
  Matrix backward(const Tape& tape, const Matrix& d_output, MlpGrad& grad) const;

  MlpGrad make_grad() const;
  ParamList params();
  ConstParamList params() const;

  Eigen::Index in_dim() const { return layers_.front().in_dim(); }
  Eigen::Index out_dim() const { return layers_.back().out_dim(); }
  double dropout_rate() const { return dropout_rate_; }
  void set_dropout_rate(double r) { dropout_rate_ = r; }

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  void init(Rng& rng);

 private:
  std::vector<DenseLayer> layers_;
  double dropout_rate_ = 0.0;
};

struct LossGrad {
  double value = 0.0;
  Matrix grad;  // dL/d(prediction)
};

// (1/N) sum (target - pred)^2 over all N elements.
LossGrad mse_loss(const Matrix& target, const Matrix& pred);
double mse_loss(std::span<const double> target, std::span<const double> pred);

// Mean binary cross entropy on probabilities, arguments clamped at eps.
LossGrad bce_loss(const Matrix& labels, const Matrix& prob, double eps = 1e-7);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  AdamState() = default;
  AdamState(const ConstParamList& shapes, AdamConfig config = {});

  std::int64_t step_count() const { return t_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<std::vector<double>>& first_moment() const { return m_; }
  const std::vector<std::vector<double>>& second_moment() const { return v_; }

 private:
  friend void adam_step(AdamState&, const ParamList&, const ConstParamList&, double);
  AdamConfig config_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

// Bias-corrected Adam update. Throws NumericError on a non-finite gradient
// before touching any parameter.
void adam_step(AdamState& state, const ParamList& params,
               const ConstParamList& grads, double lr);

// Compares analytic gradients against central differences on probe_count
// coordinates drawn uniformly from the flattened parameter list. loss_fn must
// re-evaluate the loss from the current parameter values and be
// deterministic. Parameters are restored exactly. Returns the maximum of
// |a - n| / max(|a|, |n|, floor).
struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t probes = 0;
};
GradCheckResult grad_check(const std::function<double()>& loss_fn,
                           const ParamList& params, const ConstParamList& analytic,
                           std::size_t probe_count, double h, std::uint64_t seed,
                           double floor = 1e-6);

}  // namespace chadkit::nn
