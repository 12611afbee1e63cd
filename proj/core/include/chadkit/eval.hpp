#pragma once

// Scoring, average precision, trade-style synthetic anomalies, the varying
// anomaly-ratio harness, the secondary-noise ablation and 2-D latent
// projections.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chadkit/data.hpp"
#include "chadkit/model.hpp"
#include "chadkit/rng.hpp"
#include "chadkit/trainer.hpp"

namespace chadkit::eval {

using nn::Matrix;
using nn::Vector;

// Lower score = more anomalous.
struct ScoredRecord {
  std::uint64_t id = 0;
  double score = 0.0;
  std::optional<data::Label> label;
};

// Inference-mode likelihoods for every record of an encoded, normalized
// dataset, in dataset order.
std::vector<ScoredRecord> score_dataset(const model::ChadModel& model, const data::Dataset& dataset);

enum class Orientation { anomaly_low_score, anomaly_high_score };

struct PRPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

// Ranks items from most to least anomalous; ties keep index order.
std::vector<std::size_t> anomaly_ranking(std::span<const double> scores, Orientation orientation);

// Step-interpolated area under the precision-recall curve with anomalies
// as the positive class: sum_n (R_n - R_{n-1}) P_n over the ranking.
// Throws MetricError unless both classes are present.
double average_precision(std::span<const double> scores, std::span<const bool> is_anomaly,
                         Orientation orientation = Orientation::anomaly_low_score);

// Uses the records' labels; ties broken by record id.
double average_precision(const std::vector<ScoredRecord>& scored);

// One point per rank position, threshold = score at that position.
std::vector<PRPoint> precision_recall_curve(std::span<const double> scores,
                                            std::span<const bool> is_anomaly,
                                            Orientation orientation = Orientation::anomaly_low_score);

struct SynthTrace {
  int categorical_field = -1;
  int old_category = -1;
  int continuous_field = -1;
  double old_value = 0.0;
  double shift = 0.0;
};

// Perturbs one random categorical field (new value != old, same vocabulary)
// and one random continuous field v: v + U(0.25, 0.75) if v < 0.5, else
// v + U(-0.75, -0.25). Values are not clamped.
data::Record synth_anomaly(const data::Record& record, const std::vector<int>& arities, Rng& rng,
                           SynthTrace* trace = nullptr);

// Labels every input record nominal and appends round(fraction * n)
// anomalies derived from distinct randomly chosen input records. Appended
// records get fresh ids above the largest input id.
data::Dataset synth_anomalies(const data::Dataset& test, double fraction, Rng& rng,
                              std::vector<SynthTrace>* traces = nullptr);

struct VaryAnomalyRow {
  double percentage = 0.0;
  std::size_t anomaly_count = 0;
  std::vector<double> per_seed;
  double mean = 0.0;
  double sd = 0.0;
};

// For each percentage p, mixes the nominal test set with
// round(p / (100 - p) * n_nominal) anomalies subsampled from the pool,
// repeated over `repeats` seeds. Throws MetricError for p = 0 and
// ConfigError when the pool is too small.
std::vector<VaryAnomalyRow> vary_anomaly_harness(const model::ChadModel& model,
                                                 const data::Dataset& nominal_test,
                                                 const data::Dataset& anomaly_pool,
                                                 const std::vector<double>& percentages,
                                                 std::size_t repeats, std::uint64_t seed);

std::string vary_anomaly_csv(const std::vector<VaryAnomalyRow>& rows);

struct Projection {
  Eigen::MatrixX2d points;  // n x 2
  Eigen::MatrixX2d axes;    // p x 2, orthonormal columns
  Eigen::Vector2d singular_values;
  std::vector<std::string> warnings;
};

// Mean-centres the n x p matrix (one point per row) and projects it on the
// top two right singular vectors. Rank < 2 zeroes the second coordinate with
// a warning. Axis signs are fixed so the largest-magnitude loading is
// positive.
Projection latent_projection(const Matrix& points);

// Header "x,y,label"; label is "anomaly", "nominal" or empty.
void write_projection_csv(std::ostream& out, const Projection& projection,
                          const std::vector<std::optional<data::Label>>& labels);

struct SpreadStats {
  Vector variance_without;  // per latent dimension, population variance
  Vector variance_with;     // same draws plus N(0, I) noise
  Vector standard_error;    // Monte-Carlo standard error of variance_with
  std::size_t draws = 0;
};

// Cycles through the columns of negative_latents (p x M) for `draws` samples
// and compares per-dimension variance with and without secondary noise.
SpreadStats negative_latent_spread(const Matrix& negative_latents, std::size_t draws, Rng& rng);

struct NoiseAblationRow {
  std::uint64_t seed = 0;
  double ap_with_noise = 0.0;
  double ap_without_noise = 0.0;
  Vector spread_with_noise;
  Vector spread_without_noise;
};

struct NoiseAblationReport {
  std::vector<NoiseAblationRow> rows;
  // Published KDDCup99 average precision with / without secondary noise.
  static constexpr double kReferenceWithNoise = 0.9723;
  static constexpr double kReferenceWithoutNoise = 0.9325;

  std::string to_json() const;
};

// Trains one model with and one without secondary noise per seed on `train`
// and scores the labeled `test` set with both. Negative-latent spread is
// measured on negatives of the test nominal records under each model's
// frozen encoder.
NoiseAblationReport noise_ablation(const data::Dataset& train, const data::Dataset& test,
                                   const model::ModelConfig& config,
                                   const train::TrainSchedule& schedule,
                                   const std::vector<std::uint64_t>& seeds);

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};
// Sample standard deviation (n - 1); sd = 0 for a single value.
MeanSd mean_sd(std::span<const double> values);

}  // namespace chadkit::eval
