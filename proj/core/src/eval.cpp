#include "chadkit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "chadkit/errors.hpp"
#include "chadkit/negsampler.hpp"
#include <nlohmann/json.hpp>

namespace chadkit::eval {

std::vector<ScoredRecord> score_dataset(const model::ChadModel& model, const data::Dataset& dataset) {
  if (dataset.schema.categorical_count() != model.schema.categorical_count() ||
      dataset.schema.continuous_count() != model.schema.continuous_count()) {
    throw ModelMismatchError("dataset schema does not match the model schema");
  }
  std::vector<ScoredRecord> out;
  out.reserve(dataset.size());
  constexpr std::size_t kChunk = 4096;
  std::span<const data::Record> all(dataset.records);
  for (std::size_t start = 0; start < all.size(); start += kChunk) {
    const auto chunk = all.subspan(start, std::min(kChunk, all.size() - start));
    const Eigen::RowVectorXd s = model.score(model::make_batch(chunk));
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      out.push_back({chunk[i].id, s(static_cast<Eigen::Index>(i)), chunk[i].label});
    }
  }
  return out;
}

std::vector<std::size_t> anomaly_ranking(std::span<const double> scores, Orientation orientation) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (orientation == Orientation::anomaly_low_score) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  } else {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  }
  return order;
}

namespace {

std::size_t count_positives(std::span<const double> scores, std::span<const bool> is_anomaly) {
  if (scores.size() != is_anomaly.size()) {
    throw MetricError("average precision: score and label counts differ");
  }
  const auto positives =
      static_cast<std::size_t>(std::count(is_anomaly.begin(), is_anomaly.end(), true));
  if (positives == 0 || positives == is_anomaly.size()) {
    throw MetricError("average precision is undefined unless both nominal and anomalous "
                      "labels are present");
  }
  return positives;
}

}  // namespace

double average_precision(std::span<const double> scores, std::span<const bool> is_anomaly,
                         Orientation orientation) {
  const std::size_t positives = count_positives(scores, is_anomaly);
  const auto order = anomaly_ranking(scores, orientation);
  double ap = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (!is_anomaly[order[rank]]) continue;
    ++hits;
    // Recall steps by 1/P exactly at positive ranks.
    ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
  }
  return ap / static_cast<double>(positives);
}

double average_precision(const std::vector<ScoredRecord>& scored) {
  std::vector<std::size_t> by_id(scored.size());
  std::iota(by_id.begin(), by_id.end(), std::size_t{0});
  std::stable_sort(by_id.begin(), by_id.end(),
                   [&](std::size_t a, std::size_t b) { return scored[a].id < scored[b].id; });
  std::vector<double> scores;
  std::vector<char> labels;
  for (auto i : by_id) {
    if (!scored[i].label) throw MetricError("average precision needs a label on every record");
    scores.push_back(scored[i].score);
    labels.push_back(*scored[i].label == data::Label::anomaly);
  }
  std::unique_ptr<bool[]> flags(new bool[labels.size()]);
  for (std::size_t i = 0; i < labels.size(); ++i) flags[i] = labels[i] != 0;
  return average_precision(scores, std::span<const bool>(flags.get(), labels.size()));
}

std::vector<PRPoint> precision_recall_curve(std::span<const double> scores,
                                            std::span<const bool> is_anomaly,
                                            Orientation orientation) {
  const std::size_t positives = count_positives(scores, is_anomaly);
  const auto order = anomaly_ranking(scores, orientation);
  std::vector<PRPoint> curve;
  curve.reserve(order.size());
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (is_anomaly[order[rank]]) ++hits;
    curve.push_back({scores[order[rank]],
                     static_cast<double>(hits) / static_cast<double>(rank + 1),
                     static_cast<double>(hits) / static_cast<double>(positives)});
  }
  return curve;
}

data::Record synth_anomaly(const data::Record& record, const std::vector<int>& arities, Rng& rng,
                           SynthTrace* trace) {
  std::vector<int> eligible;
  for (std::size_t w = 0; w < arities.size(); ++w) {
    if (arities[w] >= 2) eligible.push_back(static_cast<int>(w));
  }
  if (eligible.empty() || record.continuous.empty()) {
    throw ConfigError("synthetic anomalies need a categorical field with at least two values "
                      "and at least one continuous field");
  }
  data::Record out = record;
  std::uniform_int_distribution<std::size_t> pick_field(0, eligible.size() - 1);
  const int w = eligible[pick_field(rng)];
  const int old = record.categories[static_cast<std::size_t>(w)];
  std::uniform_int_distribution<int> pick_value(0, arities[static_cast<std::size_t>(w)] - 2);
  int value = pick_value(rng);
  if (value >= old) ++value;
  out.categories[static_cast<std::size_t>(w)] = value;

  std::uniform_int_distribution<std::size_t> pick_cont(0, record.continuous.size() - 1);
  const std::size_t j = pick_cont(rng);
  const double v = record.continuous[j];
  const double u = uniform_open01(rng);
  const double shift = v < 0.5 ? 0.25 + 0.5 * u : -0.75 + 0.5 * u;
  out.continuous[j] = v + shift;
  out.label = data::Label::anomaly;
  if (trace) *trace = {w, old, static_cast<int>(j), v, shift};
  return out;
}

data::Dataset synth_anomalies(const data::Dataset& test, double fraction, Rng& rng,
                              std::vector<SynthTrace>* traces) {
  if (fraction < 0.0) throw ConfigError("anomaly fraction must be >= 0");
  const std::size_t n = test.size();
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (count > n) throw ConfigError("anomaly fraction above 1 needs more test rows");
  const auto arities = test.arities();

  std::vector<data::Record> out;
  out.reserve(n + count);
  std::uint64_t next_id = 0;
  for (const auto& r : test.records) {
    auto copy = r;
    copy.label = data::Label::nominal;
    next_id = std::max(next_id, r.id + 1);
    out.push_back(std::move(copy));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Partial Fisher-Yates for `count` distinct sources.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  for (std::size_t i = 0; i < count; ++i) {
    SynthTrace t;
    auto a = synth_anomaly(test.records[order[i]], arities, rng, traces ? &t : nullptr);
    a.id = next_id++;
    out.push_back(std::move(a));
    if (traces) traces->push_back(t);
  }
  return test.with_records(std::move(out));
}

MeanSd mean_sd(std::span<const double> values) {
  MeanSd out;
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

std::vector<VaryAnomalyRow> vary_anomaly_harness(const model::ChadModel& model,
                                                 const data::Dataset& nominal_test,
                                                 const data::Dataset& anomaly_pool,
                                                 const std::vector<double>& percentages,
                                                 std::size_t repeats, std::uint64_t seed) {
  if (repeats < 1) throw ConfigError("vary-anomaly harness needs at least one repeat");
  const auto nominal = score_dataset(model, nominal_test);
  const auto pool = score_dataset(model, anomaly_pool);
  const double n_nominal = static_cast<double>(nominal.size());

  std::vector<VaryAnomalyRow> rows;
  for (double pct : percentages) {
    if (!(pct >= 0.0 && pct < 100.0)) throw ConfigError("anomaly percentage must lie in [0,100)");
    VaryAnomalyRow row;
    row.percentage = pct;
    row.anomaly_count =
        static_cast<std::size_t>(std::llround(pct / (100.0 - pct) * n_nominal));
    if (row.anomaly_count > pool.size()) {
      throw ConfigError("anomaly pool exhausted: " + std::to_string(row.anomaly_count) +
                        " anomalies requested for " + std::to_string(pct) + "%, pool has " +
                        std::to_string(pool.size()));
    }
    for (std::size_t rep = 0; rep < repeats; ++rep) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(std::llround(pct * 1000.0)), rep));
      std::vector<std::size_t> order(pool.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (std::size_t i = 0; i < row.anomaly_count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
        std::swap(order[i], order[pick(rng)]);
      }
      std::vector<double> scores;
      std::vector<char> labels;
      for (const auto& s : nominal) {
        scores.push_back(s.score);
        labels.push_back(0);
      }
      for (std::size_t i = 0; i < row.anomaly_count; ++i) {
        scores.push_back(pool[order[i]].score);
        labels.push_back(1);
      }
      std::unique_ptr<bool[]> flags(new bool[labels.size()]);
      for (std::size_t i = 0; i < labels.size(); ++i) flags[i] = labels[i] != 0;
      row.per_seed.push_back(
          average_precision(scores, std::span<const bool>(flags.get(), labels.size())));
    }
    const auto ms = mean_sd(row.per_seed);
    row.mean = ms.mean;
    row.sd = ms.sd;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string vary_anomaly_csv(const std::vector<VaryAnomalyRow>& rows) {
  std::ostringstream os;
  os.precision(10);
  os << "percentage,anomalies,mean_ap,sd_ap,repeats\n";
  for (const auto& r : rows) {
    os << r.percentage << ',' << r.anomaly_count << ',' << r.mean << ',' << r.sd << ','
       << r.per_seed.size() << '\n';
  }
  return os.str();
}

Projection latent_projection(const Matrix& points) {
  if (points.rows() < 2) throw ConfigError("latent projection needs at least two points");
  Projection out;
  const Matrix centered = points.rowwise() - points.colwise().mean();
  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const Matrix& v = svd.matrixV();
  out.axes = Eigen::MatrixX2d::Zero(points.cols(), 2);
  out.singular_values.setZero();
  const Eigen::Index available = std::min<Eigen::Index>(2, sv.size());
  for (Eigen::Index c = 0; c < available; ++c) {
    out.axes.col(c) = v.col(c);
    out.singular_values(c) = sv(c);
  }
  const double tol = static_cast<double>(std::max(points.rows(), points.cols())) *
                     std::numeric_limits<double>::epsilon() *
                     (sv.size() > 0 ? sv(0) : 0.0);
  for (Eigen::Index c = 0; c < 2; ++c) {
    if (c >= available || out.singular_values(c) <= tol) {
      out.axes.col(c).setZero();
      out.singular_values(c) = 0.0;
      out.warnings.push_back(c == 0 ? "latent matrix has rank 0; projection is all zeros"
                                    : "latent matrix has rank < 2; second coordinate zeroed");
      continue;
    }
    Eigen::Index arg = 0;
    out.axes.col(c).cwiseAbs().maxCoeff(&arg);
    if (out.axes(arg, c) < 0.0) out.axes.col(c) *= -1.0;
  }
  out.points = centered * out.axes;
  return out;
}

void write_projection_csv(std::ostream& out, const Projection& projection,
                          const std::vector<std::optional<data::Label>>& labels) {
  out.precision(17);
  out << "x,y,label\n";
  for (Eigen::Index i = 0; i < projection.points.rows(); ++i) {
    const auto& l = static_cast<std::size_t>(i) < labels.size() ? labels[static_cast<std::size_t>(i)]
                                                                 : std::optional<data::Label>{};
    out << projection.points(i, 0) << ',' << projection.points(i, 1) << ','
        << (l ? (*l == data::Label::anomaly ? "anomaly" : "nominal") : "") << '\n';
  }
}

SpreadStats negative_latent_spread(const Matrix& negative_latents, std::size_t draws, Rng& rng) {
  const Eigen::Index p = negative_latents.rows();
  const Eigen::Index m = negative_latents.cols();
  if (m < 1 || draws < 2) throw ConfigError("latent spread needs negatives and >= 2 draws");
  Matrix plain(p, static_cast<Eigen::Index>(draws));
  for (std::size_t d = 0; d < draws; ++d) {
    plain.col(static_cast<Eigen::Index>(d)) = negative_latents.col(static_cast<Eigen::Index>(d) % m);
  }
  const Matrix noisy = plain + model::standard_normal(p, plain.cols(), rng);
  SpreadStats s;
  s.draws = draws;
  const double n = static_cast<double>(draws);
  auto centered_moments = [&](const Matrix& x, Vector& var, Vector* se) {
    const Vector mean = x.rowwise().mean();
    const Matrix c = x.colwise() - mean;
    var = c.array().square().rowwise().sum() / n;
    if (se) {
      const Vector m4 = c.array().pow(4).rowwise().sum() / n;
      *se = ((m4.array() - var.array().square()) / n).sqrt();
    }
  };
  centered_moments(plain, s.variance_without, nullptr);
  centered_moments(noisy, s.variance_with, &s.standard_error);
  return s;
}

std::string NoiseAblationReport::to_json() const {
  nlohmann::ordered_json j;
  j["reference"] = {{"dataset", "KDDCup99"},
                    {"ap_with_noise", kReferenceWithNoise},
                    {"ap_without_noise", kReferenceWithoutNoise}};
  auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::ordered_json rs = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    rs.push_back({{"seed", r.seed},
                  {"ap_with_noise", r.ap_with_noise},
                  {"ap_without_noise", r.ap_without_noise},
                  {"negative_latent_variance_with_noise", vec(r.spread_with_noise)},
                  {"negative_latent_variance_without_noise", vec(r.spread_without_noise)}});
  }
  j["runs"] = rs;
  return j.dump(2);
}

NoiseAblationReport noise_ablation(const data::Dataset& train, const data::Dataset& test,
                                   const model::ModelConfig& config,
                                   const train::TrainSchedule& schedule,
                                   const std::vector<std::uint64_t>& seeds) {
  NoiseAblationReport report;
  for (auto seed : seeds) {
    NoiseAblationRow row;
    row.seed = seed;
    for (bool noise : {true, false}) {
      const auto streams = SeedStreams::from_root(seed);
      auto m = model::ChadModel::create(train.schema, train.vocabularies,
                                        fit_normalize(train), config, streams.init);
      auto sched = schedule;
      sched.secondary_noise = noise;
      train::Trainer trainer(m, train, sched, streams);
      trainer.run();
      const double ap = average_precision(score_dataset(m, test));

      // Spread of negative latents under this model's frozen encoder.
      const negsample::NegativeSampler sampler(sched.negatives, m.arities(),
                                               static_cast<int>(m.schema.continuous_count()));
      std::vector<data::Record> negs;
      for (const auto& r : test.records) {
        if (r.label && *r.label == data::Label::anomaly) continue;
        for (auto& g : sampler.generate(r, streams.negsampler, 0)) negs.push_back(std::move(g));
      }
      Rng rng(derive_seed(streams.noise, 0xab1a7e));
      const Matrix latents = m.latents(model::make_batch(negs));
      const auto spread = negative_latent_spread(latents, static_cast<std::size_t>(latents.cols()), rng);
      if (noise) {
        row.ap_with_noise = ap;
        row.spread_with_noise = spread.variance_with;
      } else {
        row.ap_without_noise = ap;
        row.spread_without_noise = spread.variance_without;
      }
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace chadkit::eval
