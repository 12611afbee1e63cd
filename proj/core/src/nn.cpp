#include "chadkit/nn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "chadkit/errors.hpp"

namespace chadkit::nn {

const char* to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "tanh") return Activation::tanh;
  if (s == "sigmoid") return Activation::sigmoid;
  throw SchemaError("unknown activation '" + s + "'");
}

void glorot_uniform(Matrix& weights, Rng& rng) {
  const double limit =
      std::sqrt(6.0 / static_cast<double>(weights.rows() + weights.cols()));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Eigen::Index i = 0; i < weights.size(); ++i) weights.data()[i] = dist(rng);
}

void DenseGrad::zero() {
  weights.setZero();
  bias.setZero();
}

DenseLayer::DenseLayer(Eigen::Index in_dim, Eigen::Index out_dim, Activation act)
    : weights(Matrix::Zero(out_dim, in_dim)),
      bias(Vector::Zero(out_dim)),
      activation(act) {}

namespace {

double sigmoid(double x) {
  // Split by sign so exp never overflows.
  if (x >= 0.0) {
    const double z = std::exp(-x);
    return 1.0 / (1.0 + z);
  }
  const double z = std::exp(x);
  return z / (1.0 + z);
}

void check_input(const DenseLayer& layer, Eigen::Index rows) {
  if (rows != layer.in_dim()) {
    std::ostringstream os;
    os << "dense layer expects input of size " << layer.in_dim() << ", got "
       << rows;
    throw SchemaError(os.str());
  }
}

}  // namespace

void activate(Matrix& m, Activation a) {
  switch (a) {
    case Activation::identity:
      break;
    case Activation::tanh:
      m = m.array().tanh();
      break;
    case Activation::sigmoid:
      m = m.unaryExpr([](double x) { return sigmoid(x); });
      break;
  }
}

Vector DenseLayer::forward(const Vector& input) const {
  check_input(*this, input.size());
  Matrix out = weights * input + bias;
  activate(out, activation);
  return out.col(0);
}

Matrix DenseLayer::forward(const Matrix& input) const {
  check_input(*this, input.rows());
  Matrix out = weights * input;
  out.colwise() += bias;
  activate(out, activation);
  return out;
}

Matrix DenseLayer::backward(const Matrix& input, const Matrix& output,
                            const Matrix& d_output, DenseGrad& grad) const {
  Matrix d_pre;
  switch (activation) {
    case Activation::identity:
      d_pre = d_output;
      break;
    case Activation::tanh:
      d_pre = d_output.array() * (1.0 - output.array().square());
      break;
    case Activation::sigmoid:
      d_pre = d_output.array() * output.array() * (1.0 - output.array());
      break;
  }
  grad.weights.noalias() += d_pre * input.transpose();
  grad.bias += d_pre.rowwise().sum();
  return weights.transpose() * d_pre;
}

DenseGrad DenseLayer::make_grad() const {
  return {Matrix::Zero(weights.rows(), weights.cols()), Vector::Zero(bias.size())};
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  if (rate <= 0.0) return Matrix::Ones(rows, cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix mask(rows, cols);
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = u(rng) < rate ? 0.0 : keep_scale;
  }
  return mask;
}

void MlpGrad::zero() {
  for (auto& g : layers) g.zero();
}

ParamList MlpGrad::params() {
  ParamList out;
  for (auto& g : layers) {
    out.push_back(as_span(g.weights));
    out.push_back(as_span(g.bias));
  }
  return out;
}

ConstParamList MlpGrad::params() const {
  ConstParamList out;
  for (const auto& g : layers) {
    out.push_back(as_const_span(g.weights));
    out.push_back(as_const_span(g.bias));
  }
  return out;
}

Mlp::Mlp(Eigen::Index in_dim, const std::vector<int>& sizes, Activation hidden,
         Activation output, double dropout_rate)
    : dropout_rate_(dropout_rate) {
  if (sizes.empty()) throw ConfigError("MLP needs at least one layer");
  Eigen::Index prev = in_dim;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 1) throw ConfigError("MLP layer sizes must be >= 1");
    const bool last = i + 1 == sizes.size();
    layers_.emplace_back(prev, sizes[i], last ? output : hidden);
    prev = sizes[i];
  }
}

void Mlp::init(Rng& rng) {
  for (auto& layer : layers_) {
    glorot_uniform(layer.weights, rng);
    layer.bias.setZero();
  }
}

Matrix Mlp::forward(const Matrix& input, Tape* tape, Rng* dropout_rng) const {
  if (tape) {
    tape->inputs.clear();
    tape->outputs.clear();
    tape->masks.clear();
  }
  Matrix x = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Matrix y = layers_[i].forward(x);
    if (tape) {
      tape->inputs.push_back(std::move(x));
      tape->outputs.push_back(y);
    }
    const bool hidden = i + 1 < layers_.size();
    if (hidden && dropout_rng && dropout_rate_ > 0.0) {
      Matrix mask = dropout_mask(y.rows(), y.cols(), dropout_rate_, *dropout_rng);
      y.array() *= mask.array();
      if (tape) tape->masks.push_back(std::move(mask));
    } else if (hidden && tape) {
      tape->masks.emplace_back();
    }
    x = std::move(y);
  }
  return x;
}

Matrix Mlp::backward(const Tape& tape, const Matrix& d_output, MlpGrad& grad) const {
  Matrix d = d_output;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const bool hidden = i + 1 < layers_.size();
    if (hidden && tape.masks[i].size() > 0) d.array() *= tape.masks[i].array();
    d = layers_[i].backward(tape.inputs[i], tape.outputs[i], d, grad.layers[i]);
  }
  return d;
}

MlpGrad Mlp::make_grad() const {
  MlpGrad g;
  for (const auto& layer : layers_) g.layers.push_back(layer.make_grad());
  return g;
}

ParamList Mlp::params() {
  ParamList out;
  for (auto& layer : layers_) {
    out.push_back(as_span(layer.weights));
    out.push_back(as_span(layer.bias));
  }
  return out;
}

ConstParamList Mlp::params() const {
  ConstParamList out;
  for (const auto& layer : layers_) {
    out.push_back(as_const_span(layer.weights));
    out.push_back(as_const_span(layer.bias));
  }
  return out;
}

LossGrad mse_loss(const Matrix& target, const Matrix& pred) {
  if (target.rows() != pred.rows() || target.cols() != pred.cols()) {
    throw SchemaError("mse_loss: shape mismatch");
  }
  const double n = static_cast<double>(target.size());
  const Matrix diff = pred - target;
  return {diff.squaredNorm() / n, (2.0 / n) * diff};
}

double mse_loss(std::span<const double> target, std::span<const double> pred) {
  if (target.size() != pred.size()) throw SchemaError("mse_loss: shape mismatch");
  if (target.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = target[i] - pred[i];
    acc += d * d;
  }
  return acc / static_cast<double>(target.size());
}

LossGrad bce_loss(const Matrix& labels, const Matrix& prob, double eps) {
  if (labels.rows() != prob.rows() || labels.cols() != prob.cols()) {
    throw SchemaError("bce_loss: shape mismatch");
  }
  const double n = static_cast<double>(labels.size());
  LossGrad out{0.0, Matrix::Zero(prob.rows(), prob.cols())};
  for (Eigen::Index i = 0; i < prob.size(); ++i) {
    const double y = labels.data()[i];
    const double p = prob.data()[i];
    const double pc = std::clamp(p, eps, 1.0 - eps);
    out.value -= y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc);
    out.grad.data()[i] = (-y / pc + (1.0 - y) / (1.0 - pc)) / n;
  }
  out.value /= n;
  return out;
}

AdamState::AdamState(const ConstParamList& shapes, AdamConfig config)
    : config_(config) {
  if (!(config.beta1 > 0.0 && config.beta1 < 1.0 && config.beta2 > 0.0 &&
        config.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in (0,1)");
  }
  for (const auto& p : shapes) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void adam_step(AdamState& state, const ParamList& params,
               const ConstParamList& grads, double lr) {
  if (params.size() != grads.size() || params.size() != state.m_.size()) {
    throw SchemaError("adam_step: parameter/gradient/state count mismatch");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].size() != params[i].size() ||
        grads[i].size() != state.m_[i].size()) {
      throw SchemaError("adam_step: tensor size mismatch");
    }
    for (std::size_t j = 0; j < grads[i].size(); ++j) {
      if (!std::isfinite(grads[i][j])) {
        std::ostringstream os;
        os << "non-finite gradient in tensor " << i << " element " << j
           << " at Adam step " << state.t_ + 1;
        throw NumericError(os.str());
      }
    }
  }
  state.t_ += 1;
  const auto& c = state.config_;
  const double t = static_cast<double>(state.t_);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.m_[i];
    auto& v = state.v_[i];
    for (std::size_t j = 0; j < params[i].size(); ++j) {
      const double g = grads[i][j];
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g * g;
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      params[i][j] -= lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

GradCheckResult grad_check(const std::function<double()>& loss_fn,
                           const ParamList& params, const ConstParamList& analytic,
                           std::size_t probe_count, double h, std::uint64_t seed,
                           double floor) {
  if (params.size() != analytic.size()) {
    throw SchemaError("grad_check: parameter/gradient count mismatch");
  }
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != analytic[i].size()) {
      throw SchemaError("grad_check: tensor size mismatch");
    }
    offsets.push_back(total);
    total += params[i].size();
  }
  GradCheckResult result;
  if (total == 0) return result;

  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  for (std::size_t probe = 0; probe < probe_count; ++probe) {
    const std::size_t flat = pick(rng);
    const auto it = std::upper_bound(offsets.begin(), offsets.end(), flat);
    const std::size_t tensor = static_cast<std::size_t>(it - offsets.begin()) - 1;
    const std::size_t idx = flat - offsets[tensor];

    double& p = params[tensor][idx];
    const double saved = p;
    p = saved + h;
    const double up = loss_fn();
    p = saved - h;
    const double down = loss_fn();
    p = saved;

    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic[tensor][idx];
    const double denom = std::max({std::abs(a), std::abs(numeric), floor});
    result.max_rel_error = std::max(result.max_rel_error, std::abs(a - numeric) / denom);
    ++result.probes;
  }
  return result;
}

}  // namespace chadkit::nn
