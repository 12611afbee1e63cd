#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>
#include <sstream>

#include "ap_oracle.hpp"
#include "chadkit/errors.hpp"
#include "chadkit/eval.hpp"
#include "test_support.hpp"

using namespace chadkit;
using namespace chadkit::eval;

namespace {

// std::vector<bool> has no contiguous storage; copy into a flat buffer.
struct Flags {
  std::unique_ptr<bool[]> data;
  std::size_t n;
  explicit Flags(const std::vector<bool>& v) : data(new bool[v.size()]), n(v.size()) {
    for (std::size_t i = 0; i < n; ++i) data[i] = v[i];
  }
  std::span<const bool> span() const { return {data.get(), n}; }
};

double ap(const std::vector<double>& s, const std::vector<bool>& y,
          Orientation o = Orientation::anomaly_low_score) {
  return average_precision(s, Flags(y).span(), o);
}

// Symmetric Jacobi eigenvalue iteration; eigenvectors in the columns of v.
void jacobi_eigen(Eigen::MatrixXd a, Eigen::VectorXd& values, Eigen::MatrixXd& v) {
  const Eigen::Index n = a.rows();
  v = Eigen::MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  values = a.diagonal();
}

}  // namespace

TEST(AveragePrecision, WorkedExample) {
  // Most anomalous first: anomaly, nominal, anomaly, nominal.
  EXPECT_NEAR(ap({0.1, 0.2, 0.3, 0.9}, {true, false, true, false}), (1.0 + 2.0 / 3.0) / 2.0, 1e-15);
  EXPECT_NEAR(ap({0.1, 0.2, 0.3}, {true, true, false}), 1.0, 1e-15);
  EXPECT_NEAR(ap({0.1, 0.2, 0.3}, {false, false, true}), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(ap({5, 1}, {true, false}, Orientation::anomaly_high_score), 1.0, 1e-15);
}

TEST(AveragePrecision, TiesKeepIndexOrder) {
  EXPECT_NEAR(ap({0.5, 0.5}, {true, false}), 1.0, 1e-15);
  EXPECT_NEAR(ap({0.5, 0.5}, {false, true}), 0.5, 1e-15);
  const auto r = anomaly_ranking(std::vector<double>{0.3, 0.1, 0.3, 0.1}, Orientation::anomaly_low_score);
  EXPECT_EQ(r, (std::vector<std::size_t>{1, 3, 0, 2}));
}

TEST(AveragePrecision, SingleClassIsUndefined) {
  EXPECT_THROW(ap({0.1, 0.2}, {false, false}), MetricError);
  EXPECT_THROW(ap({0.1, 0.2}, {true, true}), MetricError);
  EXPECT_THROW(ap({0.1, 0.2}, {true}), MetricError);
}

TEST(AveragePrecision, MatchesBruteForceOracle) {
  Rng rng(2024);
  for (int inst = 0; inst < 200; ++inst) {
    const auto n = std::uniform_int_distribution<int>(2, 200)(rng);
    const bool coarse = inst % 2 == 0;  // coarse grid forces ties
    std::vector<double> s(static_cast<std::size_t>(n));
    std::vector<bool> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      s[i] = coarse ? std::uniform_int_distribution<int>(0, 9)(rng)
                    : std::uniform_real_distribution<double>(-3, 3)(rng);
      y[i] = std::bernoulli_distribution(0.2)(rng);
    }
    y[0] = true;
    y[1] = false;
    EXPECT_NEAR(ap(s, y), fixtures::brute_force_ap(s, y, true), 1e-12);
    EXPECT_NEAR(ap(s, y, Orientation::anomaly_high_score), fixtures::brute_force_ap(s, y, false), 1e-12);
    // Strictly increasing transforms preserve AP.
    std::vector<double> t1(s), t2(s);
    for (auto& v : t1) v = 3 * v + 1;
    for (auto& v : t2) v = std::exp(v / 3);
    EXPECT_NEAR(ap(t1, y), ap(s, y), 1e-12);
    EXPECT_NEAR(ap(t2, y), ap(s, y), 1e-12);
  }
}

TEST(AveragePrecision, ScoredRecordsSortById) {
  std::vector<ScoredRecord> recs{{5, 0.9, data::Label::nominal},
                                 {2, 0.5, data::Label::anomaly},
                                 {1, 0.5, data::Label::nominal}};
  // Tie at 0.5 resolved by id: record 1 (nominal) ranks first.
  EXPECT_NEAR(average_precision(recs), 0.5, 1e-15);
  recs.push_back({7, 0.1, std::nullopt});
  EXPECT_THROW(average_precision(recs), MetricError);
}

TEST(PrecisionRecall, CurveEndsAtFullRecall) {
  const std::vector<double> s{0.1, 0.4, 0.2, 0.8};
  const auto curve = precision_recall_curve(s, Flags({true, false, true, false}).span());
  ASSERT_EQ(curve.size(), 4u);
  EXPECT_DOUBLE_EQ(curve[0].threshold, 0.1);
  EXPECT_DOUBLE_EQ(curve[1].recall, 1.0);
  EXPECT_DOUBLE_EQ(curve[1].precision, 1.0);
  EXPECT_DOUBLE_EQ(curve[3].precision, 0.5);
}

TEST(SynthAnomaly, PerturbsOneCategoryAndOneContinuousWithinIntervals) {
  const std::vector<int> arities{1, 6, 9};
  const auto ds = fixtures::toy_dataset(arities, 5, 300, 3);
  Rng rng(1);
  for (const auto& rec : ds.records) {
    SynthTrace t;
    const auto a = synth_anomaly(rec, arities, rng, &t);
    ASSERT_NE(t.categorical_field, 0);
    int changed_cat = 0, changed_cont = 0;
    for (std::size_t w = 0; w < arities.size(); ++w) {
      if (a.categories[w] != rec.categories[w]) {
        ++changed_cat;
        EXPECT_EQ(static_cast<int>(w), t.categorical_field);
        EXPECT_GE(a.categories[w], 0);
        EXPECT_LT(a.categories[w], arities[w]);
      }
    }
    for (std::size_t j = 0; j < rec.continuous.size(); ++j) {
      if (a.continuous[j] != rec.continuous[j]) {
        ++changed_cont;
        EXPECT_EQ(static_cast<int>(j), t.continuous_field);
        const double d = a.continuous[j] - rec.continuous[j];
        if (rec.continuous[j] < 0.5) {
          EXPECT_GT(d, 0.25);
          EXPECT_LT(d, 0.75);
        } else {
          EXPECT_GT(d, -0.75);
          EXPECT_LT(d, -0.25);
        }
      }
    }
    EXPECT_EQ(changed_cat, 1);
    EXPECT_EQ(changed_cont, 1);
    EXPECT_EQ(a.label, data::Label::anomaly);
  }
  data::Record degenerate;
  degenerate.categories = {0};
  degenerate.continuous = {};
  EXPECT_THROW(synth_anomaly(degenerate, {1}, rng), ConfigError);
}

TEST(SynthAnomaly, DatasetMixCountsAndIds) {
  auto ds = fixtures::toy_dataset({4, 5}, 3, 95, 4);
  for (auto& r : ds.records) r.label.reset();
  Rng rng(2);
  std::vector<SynthTrace> traces;
  const auto mix = synth_anomalies(ds, 0.1, rng, &traces);
  ASSERT_EQ(mix.size(), 95u + 10u);  // round(9.5) = 10
  EXPECT_EQ(traces.size(), 10u);
  std::set<std::uint64_t> ids;
  for (std::size_t i = 0; i < mix.size(); ++i) {
    ids.insert(mix.records[i].id);
    EXPECT_EQ(mix.records[i].label, i < 95 ? data::Label::nominal : data::Label::anomaly);
  }
  EXPECT_EQ(ids.size(), mix.size());
  EXPECT_EQ(mix.records[95].id, 95u);
  EXPECT_THROW(synth_anomalies(ds, -0.1, rng), ConfigError);
  EXPECT_THROW(synth_anomalies(ds, 1.5, rng), ConfigError);
}

TEST(Scoring, MatchesModelAndRejectsForeignSchemas) {
  const auto ds = fixtures::toy_dataset({4, 5}, 3, 10, 4);
  const auto m = fixtures::toy_model(ds, 1);
  const auto scored = score_dataset(m, ds);
  const auto direct = m.score(model::make_batch(ds.records));
  ASSERT_EQ(scored.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(scored[i].score, direct(static_cast<Eigen::Index>(i)));
    EXPECT_EQ(scored[i].id, ds.records[i].id);
  }
  const auto other = fixtures::toy_dataset({4}, 3, 10, 4);
  EXPECT_THROW(score_dataset(m, other), ModelMismatchError);
}

TEST(VaryAnomaly, CountsRepeatsAndStatistics) {
  const auto nominal = fixtures::toy_dataset({4, 5}, 4, 98, 5);
  Rng rng(3);
  const auto mix = synth_anomalies(nominal, 1.0, rng);
  const auto pool = mix.with_records({mix.records.begin() + 98, mix.records.end()});
  const auto m = fixtures::toy_model(nominal, 1);
  const auto rows = vary_anomaly_harness(m, nominal, pool, {2, 4, 6, 8, 10}, 3, 7);
  ASSERT_EQ(rows.size(), 5u);
  const std::size_t expected[] = {2, 4, 6, 9, 11};
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(rows[i].anomaly_count, expected[i]);
    ASSERT_EQ(rows[i].per_seed.size(), 3u);
    const auto ms = mean_sd(rows[i].per_seed);
    EXPECT_DOUBLE_EQ(rows[i].mean, ms.mean);
    EXPECT_DOUBLE_EQ(rows[i].sd, ms.sd);
    for (double v : rows[i].per_seed) {
      EXPECT_GT(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_EQ(rows[0].per_seed, vary_anomaly_harness(m, nominal, pool, {2}, 3, 7)[0].per_seed);
  const auto csv = vary_anomaly_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "percentage,anomalies,mean_ap,sd_ap,repeats");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
  EXPECT_THROW(vary_anomaly_harness(m, nominal, pool, {0}, 1, 1), MetricError);
  EXPECT_THROW(vary_anomaly_harness(m, nominal, pool, {60}, 1, 1), ConfigError);
}

TEST(MeanSd, SampleStandardDeviation) {
  const std::vector<double> v{1, 2, 3, 4};
  const auto ms = mean_sd(v);
  EXPECT_DOUBLE_EQ(ms.mean, 2.5);
  EXPECT_NEAR(ms.sd, std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_EQ(mean_sd(std::vector<double>{3}).sd, 0.0);
}

TEST(Projection, MatchesJacobiEigenOracle) {
  Rng rng(6);
  std::normal_distribution<double> n(0, 1);
  Eigen::MatrixXd x(60, 5);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
  x.col(1) *= 3.0;
  x.col(3) = 0.5 * x.col(1) + 2.0 * x.col(3);
  x.rowwise() += Eigen::RowVectorXd::LinSpaced(5, 1, 5);
  const auto proj = latent_projection(x);
  EXPECT_TRUE(proj.warnings.empty());

  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  jacobi_eigen(c.transpose() * c, values, vectors);
  std::vector<Eigen::Index> order(5);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values(a) > values(b); });
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd axis = vectors.col(order[k]);
    Eigen::Index arg;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis(arg) < 0) axis = -axis;
    EXPECT_NEAR(proj.singular_values(k), std::sqrt(values(order[k])), 1e-9);
    EXPECT_LT((proj.axes.col(k) - axis).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((proj.points.col(k) - c * axis).cwiseAbs().maxCoeff(), 1e-9);
  }
  EXPECT_NEAR(proj.axes.col(0).dot(proj.axes.col(1)), 0.0, 1e-12);
}

TEST(Projection, RankDeficientInputWarns) {
  Eigen::MatrixXd x(10, 3);
  for (int i = 0; i < 10; ++i) x.row(i) << i, 2.0 * i, -i;
  const auto proj = latent_projection(x);
  ASSERT_EQ(proj.warnings.size(), 1u);
  EXPECT_TRUE(proj.points.col(1).isZero());
  EXPECT_GT(proj.singular_values(0), 0.0);
  const auto constant = latent_projection(Eigen::MatrixXd::Ones(4, 3));
  EXPECT_EQ(constant.warnings.size(), 2u);
  EXPECT_TRUE(constant.points.isZero());
  EXPECT_THROW(latent_projection(Eigen::MatrixXd::Ones(1, 3)), ConfigError);
}

TEST(Projection, CsvLabels) {
  Eigen::MatrixXd x(3, 2);
  x << 0, 0, 1, 0, 0, 2;
  std::ostringstream os;
  write_projection_csv(os, latent_projection(x), {data::Label::nominal, data::Label::anomaly, std::nullopt});
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "x,y,label");
  std::getline(in, line);
  EXPECT_TRUE(line.ends_with(",nominal"));
  std::getline(in, line);
  EXPECT_TRUE(line.ends_with(",anomaly"));
  std::getline(in, line);
  EXPECT_TRUE(line.ends_with(","));
}

TEST(LatentSpread, NoiseAddsUnitVariance) {
  Rng rng(12);
  Eigen::MatrixXd neg(4, 500);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  for (Eigen::Index i = 0; i < neg.size(); ++i) neg.data()[i] = u(rng) * (1 + i % 4);
  const auto s = negative_latent_spread(neg, 100000, rng);
  for (Eigen::Index d = 0; d < 4; ++d) {
    EXPECT_LE(std::abs(s.variance_with(d) - s.variance_without(d) - 1.0), 3 * s.standard_error(d));
  }
  EXPECT_THROW(negative_latent_spread(neg, 1, rng), ConfigError);
}
