#pragma once

// Density estimation network: a two-layer MLP f(.; theta) over latent
// vectors whose sigmoid output approximates the posterior that a point is
// nominal rather than noise.

#include <Eigen/Dense>

#include "chadkit/nn.hpp"
#include "chadkit/rng.hpp"

namespace chadkit::model {

using nn::Matrix;
using nn::Vector;

class Estimator {
 public:
  Estimator() = default;
  // Layers p -> max(1, floor(p/2)) -> 1, tanh hidden, sigmoid output.
  explicit Estimator(int latent_dim, double dropout = 0.1);

  void init(Rng& rng);

  // 1 x B likelihoods in inference mode.
  Eigen::RowVectorXd likelihood(const Matrix& latents) const;
  double likelihood(const Vector& latent) const;

  // Hidden-layer activations (inference mode), h x B.
  Matrix penultimate(const Matrix& latents) const;

  int latent_dim() const { return static_cast<int>(mlp_.in_dim()); }

  nn::Mlp& mlp() { return mlp_; }
  const nn::Mlp& mlp() const { return mlp_; }

 private:
  nn::Mlp mlp_;
};

struct SecondaryNoiseSpec {
  bool enabled = true;
};

// z + n with n ~ N(0, I) drawn fresh per column; identity when disabled.
Matrix inject_noise(const Matrix& latents, const SecondaryNoiseSpec& spec, Rng& rng);

// Standard normal matrix, the n_k of the estimator loss.
Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng);

inline constexpr double kLogClamp = 1e-7;

struct EstimatorLoss {
  double value = 0.0;
  Eigen::RowVectorXd d_positive;  // dL/df(x_e), 1 x B
  Matrix d_negative;              // dL/df(z_k), K x B
};

// Per record: -gamma ln f(x_e) - ln(1 - mean_k f(z_k)), averaged over the B
// records. Column b of negative_likelihoods holds the K negatives of record
// b. Both log arguments are clamped below at kLogClamp; the gradient is zero
// where the clamp is active.
EstimatorLoss estimator_loss(const Eigen::RowVectorXd& positive_likelihoods,
                             const Matrix& negative_likelihoods, double gamma);

}  // namespace chadkit::model
