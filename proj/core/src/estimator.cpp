#include "chadkit/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "chadkit/errors.hpp"

namespace chadkit::model {

Estimator::Estimator(int latent_dim, double dropout)
    : mlp_(latent_dim, {std::max(1, latent_dim / 2), 1}, nn::Activation::tanh,
           nn::Activation::sigmoid, dropout) {
  if (latent_dim < 1) throw ConfigError("estimator latent dimension must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout rate must lie in [0,1)");
}

void Estimator::init(Rng& rng) { mlp_.init(rng); }

Eigen::RowVectorXd Estimator::likelihood(const Matrix& latents) const {
  return mlp_.forward(latents).row(0);
}

double Estimator::likelihood(const Vector& latent) const {
  return mlp_.forward(Matrix(latent))(0, 0);
}

Matrix Estimator::penultimate(const Matrix& latents) const {
  return mlp_.layers().front().forward(latents);
}

Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix n(rows, cols);
  for (Eigen::Index i = 0; i < n.size(); ++i) n.data()[i] = dist(rng);
  return n;
}

Matrix inject_noise(const Matrix& latents, const SecondaryNoiseSpec& spec, Rng& rng) {
  if (!spec.enabled) return latents;
  return latents + standard_normal(latents.rows(), latents.cols(), rng);
}

EstimatorLoss estimator_loss(const Eigen::RowVectorXd& positive_likelihoods,
                             const Matrix& negative_likelihoods, double gamma) {
  const Eigen::Index b = positive_likelihoods.size();
  const Eigen::Index k = negative_likelihoods.rows();
  if (negative_likelihoods.cols() != b) {
    throw SchemaError("estimator_loss: negatives must have one column per positive");
  }
  if (k < 1) throw SchemaError("estimator_loss: each positive needs at least one negative");
  EstimatorLoss out;
  out.d_positive = Eigen::RowVectorXd::Zero(b);
  out.d_negative = Matrix::Zero(k, b);
  if (b == 0) return out;
  const double inv_b = 1.0 / static_cast<double>(b);
  const double inv_k = 1.0 / static_cast<double>(k);
  for (Eigen::Index i = 0; i < b; ++i) {
    const double fp = positive_likelihoods(i);
    const double mean_neg = negative_likelihoods.col(i).mean();
    const double pos_arg = fp;
    const double neg_arg = 1.0 - mean_neg;
    out.value += -gamma * std::log(std::max(pos_arg, kLogClamp)) -
                 std::log(std::max(neg_arg, kLogClamp));
    if (pos_arg > kLogClamp) out.d_positive(i) = -gamma / pos_arg * inv_b;
    if (neg_arg > kLogClamp) out.d_negative.col(i).setConstant(inv_k / neg_arg * inv_b);
  }
  out.value *= inv_b;
  return out;
}

}  // namespace chadkit::model
