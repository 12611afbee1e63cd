#pragma once

// Two-dimensional toy benchmark: two triangular Gamma clusters of nominal
// points, Gaussian anomaly blobs in low-density gaps, and three detectors
// (k-means distance, GMM likelihood, a discriminator trained against
// uniform negatives) compared by average precision.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chadkit/nn.hpp"
#include "chadkit/rng.hpp"

namespace chadkit::concept_bench {

using nn::Matrix;
using nn::Vector;

// Independent Gamma(shape, scale) per axis, shifted by offset.
struct GammaCluster {
  double shape_x = 2.0;
  double scale_x = 1.0;
  double shape_y = 2.0;
  double scale_y = 1.0;
  Eigen::Vector2d offset = Eigen::Vector2d::Zero();
  int count = 500;

  double pdf(const Eigen::Vector2d& p) const;
  // Requires shapes >= 1 (the density is unbounded otherwise).
  double mode_density() const;
  Eigen::Vector2d sample(Rng& rng) const;
};

struct GaussianBlob {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = 0.25 * Eigen::Matrix2d::Identity();
  int count = 50;
};

struct NceSettings {
  std::vector<int> hidden{32, 32};
  int epochs = 200;
  int batch_size = 128;
  double learning_rate = 5e-3;
  // Uniform negatives drawn per nominal training point.
  double negatives_per_nominal = 2.0;
};

struct ConceptConfig {
  std::array<GammaCluster, 2> clusters;
  std::array<GaussianBlob, 2> anomalies;
  // Negatives must satisfy P_Gi(u) < epsilon_fraction * mode density of Gi
  // for both clusters. Infinity disables rejection.
  double epsilon_fraction = 1e-3;
  // Uniform domain: nominal bounding box grown by this fraction per side.
  double box_margin = 0.1;
  NceSettings nce;
  std::uint64_t seed = 1;
  int seeds = 10;

  static ConceptConfig defaults();
  void validate() const;
  std::string to_json() const;
  static ConceptConfig from_json(const std::string& text);
};

struct LabeledPoints {
  Matrix points;                 // 2 x n
  std::vector<char> is_anomaly;  // n

  std::size_t size() const { return is_anomaly.size(); }
  Matrix nominal() const;
};

// Nominal clusters first (cluster 0 then 1), then anomaly blobs.
LabeledPoints gen_concept_data(const ConceptConfig& config, Rng& rng);

struct KMeansModel {
  Matrix centers;  // d x k
  std::vector<double> inertia_history;
  int iterations = 0;

  // Euclidean distance to the nearest center, per column.
  Eigen::RowVectorXd score(const Matrix& points) const;
  std::vector<int> assign(const Matrix& points) const;
};

// k-means++ seeding then Lloyd's iteration until the largest center shift
// falls below 1e-8 (or 1000 iterations). An empty cluster is re-seeded at
// the point farthest from its assigned center.
KMeansModel fit_kmeans(const Matrix& points, int k, std::uint64_t seed);
double kmeans_inertia(const Matrix& points, const Matrix& centers);

struct GmmModel {
  std::vector<double> weights;
  std::vector<Vector> means;
  std::vector<Matrix> covariances;
  std::vector<double> log_likelihood_history;  // total data log-likelihood
  int restarts = 0;

  // Log-likelihood of each column under the mixture.
  Eigen::RowVectorXd score(const Matrix& points) const;
  // k x n posterior component memberships.
  Matrix responsibilities(const Matrix& points) const;
};

// Full-covariance EM with +1e-6 I added to every covariance update; stops
// once the total log-likelihood improves by less than 1e-8 or after 500
// iterations. A covariance that cannot be factorized restarts the fit from
// a new seed (at most 5 restarts).
GmmModel fit_gmm_em(const Matrix& points, int k, std::uint64_t seed);

struct Box {
  Eigen::Vector2d min;
  Eigen::Vector2d max;
};

Box expanded_bounding_box(const Matrix& points, double margin);

struct UniformNegatives {
  Matrix points;  // 2 x count
  std::size_t drawn = 0;
};

// True when u passes the density condition against both clusters.
bool accept_negative(const ConceptConfig& config, const Eigen::Vector2d& u);

// Rejection-samples `count` uniform points in the box. Throws ConfigError
// once more than 99.9% of (at least 10^4) draws have been rejected.
UniformNegatives sample_uniform_negatives(const ConceptConfig& config, const Box& box,
                                          std::size_t count, Rng& rng);

struct NceDiscriminator {
  nn::Mlp mlp;
  Box box;  // input scaling
  std::vector<double> loss_history;  // mean BCE per epoch

  // Posterior of the nominal class, per column.
  Eigen::RowVectorXd score(const Matrix& points) const;
};

NceDiscriminator nce_concept(const Matrix& nominal, const ConceptConfig& config, Rng& rng);

struct ConceptRun {
  std::uint64_t seed = 0;
  double kmeans2 = 0.0;
  double kmeans1 = 0.0;
  double gmm2 = 0.0;
  double nce = 0.0;
};

struct ConceptRow {
  std::string method;
  std::vector<double> ap;
  double mean = 0.0;
  double sd = 0.0;
};

struct ConceptBenchResult {
  std::vector<ConceptRun> runs;
  std::vector<ConceptRow> rows;  // GMM k=2, K-means k=2, K-means k=1, NCE

  const ConceptRow& row(const std::string& method) const;
  std::string per_seed_csv() const;  // method,seed,ap
  std::string summary_csv() const;   // method,mean_ap,sd_ap,seeds
};

// Per seed s: a training set and an independent held-out mix are generated;
// every method is fit on the training nominal points and scored on the
// held-out mix. Seeds run in parallel.
ConceptRun run_concept_seed(const ConceptConfig& config, std::uint64_t seed);
ConceptBenchResult run_concept_bench(const ConceptConfig& config);

void write_points_csv(std::ostream& out, const LabeledPoints& data);

}  // namespace chadkit::concept_bench
