#include "chadkit/conceptbench.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "chadkit/errors.hpp"
#include "chadkit/eval.hpp"
#include "chadkit/parallel.hpp"

namespace chadkit::concept_bench {

namespace {

double gamma_pdf(double x, double shape, double scale) {
  if (x <= 0.0) return 0.0;
  return std::exp((shape - 1.0) * std::log(x) - x / scale - std::lgamma(shape) -
                  shape * std::log(scale));
}

double gamma_mode_density(double shape, double scale) {
  return gamma_pdf((shape - 1.0) * scale > 0.0 ? (shape - 1.0) * scale : 1e-300, shape, scale);
}

}  // namespace

double GammaCluster::pdf(const Eigen::Vector2d& p) const {
  return gamma_pdf(p.x() - offset.x(), shape_x, scale_x) *
         gamma_pdf(p.y() - offset.y(), shape_y, scale_y);
}

double GammaCluster::mode_density() const {
  if (shape_x < 1.0 || shape_y < 1.0) {
    throw ConfigError("Gamma shape < 1 has an unbounded density; use an absolute epsilon");
  }
  const double fx = shape_x == 1.0 ? 1.0 / scale_x : gamma_mode_density(shape_x, scale_x);
  const double fy = shape_y == 1.0 ? 1.0 / scale_y : gamma_mode_density(shape_y, scale_y);
  return fx * fy;
}

Eigen::Vector2d GammaCluster::sample(Rng& rng) const {
  std::gamma_distribution<double> gx(shape_x, scale_x);
  std::gamma_distribution<double> gy(shape_y, scale_y);
  const double x = gx(rng);
  const double y = gy(rng);
  return offset + Eigen::Vector2d(x, y);
}

ConceptConfig ConceptConfig::defaults() {
  ConceptConfig c;
  c.clusters[0].offset = {0.0, 0.0};
  c.clusters[1].offset = {8.0, 8.0};
  // Both blobs sit where the nominal density is (near) zero but the
  // distance to a cluster center is ordinary: one in the gap between the
  // clusters, one just outside the flat edge of the second cluster.
  c.anomalies[0].mean = {7.0, 7.0};
  c.anomalies[1].mean = {7.0, 11.0};
  return c;
}

void ConceptConfig::validate() const {
  for (const auto& g : clusters) {
    if (g.count < 1) throw ConfigError("cluster counts must be >= 1");
    if (!(g.shape_x > 0 && g.shape_y > 0 && g.scale_x > 0 && g.scale_y > 0)) {
      throw ConfigError("Gamma shape and scale parameters must be positive");
    }
    if (std::isfinite(epsilon_fraction)) g.mode_density();
  }
  for (const auto& a : anomalies) {
    if (a.count < 1) throw ConfigError("anomaly counts must be >= 1");
    Eigen::LLT<Eigen::Matrix2d> llt(a.cov);
    if (llt.info() != Eigen::Success || !a.cov.isApprox(a.cov.transpose())) {
      throw ConfigError("anomaly covariance must be symmetric positive definite");
    }
  }
  if (!(epsilon_fraction > 0.0)) throw ConfigError("epsilon must be > 0");
  if (!(box_margin >= 0.0)) throw ConfigError("box margin must be >= 0");
  if (seeds < 1) throw ConfigError("concept bench needs at least one seed");
  if (nce.epochs < 1 || nce.batch_size < 1 || !(nce.learning_rate > 0.0) ||
      !(nce.negatives_per_nominal > 0.0) || nce.hidden.empty()) {
    throw ConfigError("invalid NCE discriminator settings");
  }
  for (int h : nce.hidden) {
    if (h < 1) throw ConfigError("NCE hidden sizes must be >= 1");
  }
}

namespace {

using json = nlohmann::ordered_json;

json vec2(const Eigen::Vector2d& v) { return json::array({v.x(), v.y()}); }

Eigen::Vector2d read_vec2(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(what + " must be a 2-element array");
  return {j[0].get<double>(), j[1].get<double>()};
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, _] : j.items()) {
    if (std::find_if(keys.begin(), keys.end(), [&](const char* s) { return k == s; }) == keys.end()) {
      throw ConfigError("unknown key '" + k + "' in " + where);
    }
  }
}

}  // namespace

std::string ConceptConfig::to_json() const {
  json j;
  j["clusters"] = json::array();
  for (const auto& g : clusters) {
    j["clusters"].push_back({{"shape_x", g.shape_x},
                             {"scale_x", g.scale_x},
                             {"shape_y", g.shape_y},
                             {"scale_y", g.scale_y},
                             {"offset", vec2(g.offset)},
                             {"count", g.count}});
  }
  j["anomalies"] = json::array();
  for (const auto& a : anomalies) {
    j["anomalies"].push_back({{"mean", vec2(a.mean)},
                              {"cov", json::array({vec2(a.cov.row(0).transpose()),
                                                   vec2(a.cov.row(1).transpose())})},
                              {"count", a.count}});
  }
  j["epsilon_fraction"] = epsilon_fraction;
  j["box_margin"] = box_margin;
  j["nce"] = {{"hidden", nce.hidden},
              {"epochs", nce.epochs},
              {"batch_size", nce.batch_size},
              {"learning_rate", nce.learning_rate},
              {"negatives_per_nominal", nce.negatives_per_nominal}};
  j["seed"] = seed;
  j["seeds"] = seeds;
  return j.dump(2);
}

ConceptConfig ConceptConfig::from_json(const std::string& text) {
  ConceptConfig c = defaults();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("concept config is not valid JSON: ") + e.what());
  }
  try {
    reject_unknown(j, {"clusters", "anomalies", "epsilon_fraction", "box_margin", "nce", "seed", "seeds"},
                   "concept config");
    if (j.contains("clusters")) {
      if (!j["clusters"].is_array() || j["clusters"].size() != 2) {
        throw ConfigError("clusters must list exactly two clusters");
      }
      for (std::size_t i = 0; i < 2; ++i) {
        const auto& g = j["clusters"][i];
        reject_unknown(g, {"shape_x", "scale_x", "shape_y", "scale_y", "offset", "count"}, "cluster");
        auto& t = c.clusters[i];
        t.shape_x = g.value("shape_x", t.shape_x);
        t.scale_x = g.value("scale_x", t.scale_x);
        t.shape_y = g.value("shape_y", t.shape_y);
        t.scale_y = g.value("scale_y", t.scale_y);
        t.count = g.value("count", t.count);
        if (g.contains("offset")) t.offset = read_vec2(g["offset"], "cluster offset");
      }
    }
    if (j.contains("anomalies")) {
      if (!j["anomalies"].is_array() || j["anomalies"].size() != 2) {
        throw ConfigError("anomalies must list exactly two blobs");
      }
      for (std::size_t i = 0; i < 2; ++i) {
        const auto& a = j["anomalies"][i];
        reject_unknown(a, {"mean", "cov", "count"}, "anomaly blob");
        auto& t = c.anomalies[i];
        t.count = a.value("count", t.count);
        if (a.contains("mean")) t.mean = read_vec2(a["mean"], "anomaly mean");
        if (a.contains("cov")) {
          const auto& m = a["cov"];
          if (!m.is_array() || m.size() != 2) throw ConfigError("anomaly cov must be 2x2");
          t.cov.row(0) = read_vec2(m[0], "anomaly cov row").transpose();
          t.cov.row(1) = read_vec2(m[1], "anomaly cov row").transpose();
        }
      }
    }
    c.epsilon_fraction = j.value("epsilon_fraction", c.epsilon_fraction);
    c.box_margin = j.value("box_margin", c.box_margin);
    c.seed = j.value("seed", c.seed);
    c.seeds = j.value("seeds", c.seeds);
    if (j.contains("nce")) {
      const auto& n = j["nce"];
      reject_unknown(n, {"hidden", "epochs", "batch_size", "learning_rate", "negatives_per_nominal"},
                     "nce");
      if (n.contains("hidden")) c.nce.hidden = n["hidden"].get<std::vector<int>>();
      c.nce.epochs = n.value("epochs", c.nce.epochs);
      c.nce.batch_size = n.value("batch_size", c.nce.batch_size);
      c.nce.learning_rate = n.value("learning_rate", c.nce.learning_rate);
      c.nce.negatives_per_nominal = n.value("negatives_per_nominal", c.nce.negatives_per_nominal);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("concept config: ") + e.what());
  }
  c.validate();
  return c;
}

Matrix LabeledPoints::nominal() const {
  const auto n = static_cast<Eigen::Index>(std::count(is_anomaly.begin(), is_anomaly.end(), 0));
  Matrix out(2, n);
  Eigen::Index c = 0;
  for (std::size_t i = 0; i < is_anomaly.size(); ++i) {
    if (!is_anomaly[i]) out.col(c++) = points.col(static_cast<Eigen::Index>(i));
  }
  return out;
}

LabeledPoints gen_concept_data(const ConceptConfig& config, Rng& rng) {
  config.validate();
  std::size_t total = 0;
  for (const auto& g : config.clusters) total += static_cast<std::size_t>(g.count);
  for (const auto& a : config.anomalies) total += static_cast<std::size_t>(a.count);
  LabeledPoints out;
  out.points.resize(2, static_cast<Eigen::Index>(total));
  out.is_anomaly.reserve(total);
  Eigen::Index c = 0;
  for (const auto& g : config.clusters) {
    for (int i = 0; i < g.count; ++i) {
      out.points.col(c++) = g.sample(rng);
      out.is_anomaly.push_back(0);
    }
  }
  std::normal_distribution<double> normal;
  for (const auto& a : config.anomalies) {
    const Eigen::Matrix2d l = a.cov.llt().matrixL();
    for (int i = 0; i < a.count; ++i) {
      const double z0 = normal(rng);
      const double z1 = normal(rng);
      out.points.col(c++) = a.mean + l * Eigen::Vector2d(z0, z1);
      out.is_anomaly.push_back(1);
    }
  }
  return out;
}

// ---- k-means ----

namespace {

Eigen::RowVectorXd squared_distance_to_nearest(const Matrix& points, const Matrix& centers,
                                               std::vector<int>* assignment) {
  Eigen::RowVectorXd best(points.cols());
  if (assignment) assignment->assign(static_cast<std::size_t>(points.cols()), 0);
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    double d_best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Eigen::Index c = 0; c < centers.cols(); ++c) {
      const double d = (points.col(i) - centers.col(c)).squaredNorm();
      if (d < d_best) {
        d_best = d;
        arg = static_cast<int>(c);
      }
    }
    best(i) = d_best;
    if (assignment) (*assignment)[static_cast<std::size_t>(i)] = arg;
  }
  return best;
}

Matrix kmeanspp_seed(const Matrix& points, int k, Rng& rng) {
  const Eigen::Index n = points.cols();
  Matrix centers(points.rows(), k);
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centers.col(0) = points.col(first(rng));
  Eigen::RowVectorXd d2 = (points.colwise() - centers.col(0)).colwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      const double target = uniform_open01(rng) * total;
      double acc = 0.0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc >= target && d2(i) > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = first(rng);
    }
    centers.col(c) = points.col(pick);
    d2 = d2.cwiseMin((points.colwise() - centers.col(c)).colwise().squaredNorm());
  }
  return centers;
}

}  // namespace

double kmeans_inertia(const Matrix& points, const Matrix& centers) {
  return squared_distance_to_nearest(points, centers, nullptr).sum();
}

Eigen::RowVectorXd KMeansModel::score(const Matrix& points) const {
  return squared_distance_to_nearest(points, centers, nullptr).cwiseSqrt();
}

std::vector<int> KMeansModel::assign(const Matrix& points) const {
  std::vector<int> a;
  squared_distance_to_nearest(points, centers, &a);
  return a;
}

KMeansModel fit_kmeans(const Matrix& points, int k, std::uint64_t seed) {
  if (k < 1) throw ConfigError("k-means needs k >= 1");
  if (points.cols() < k) throw ConfigError("k-means needs at least k points");
  Rng rng(seed);
  KMeansModel m;
  m.centers = kmeanspp_seed(points, k, rng);
  std::vector<int> assignment;
  constexpr int kMaxIter = 1000;
  for (int it = 0; it < kMaxIter; ++it) {
    const Eigen::RowVectorXd d2 = squared_distance_to_nearest(points, m.centers, &assignment);
    m.inertia_history.push_back(d2.sum());
    Matrix sums = Matrix::Zero(points.rows(), k);
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < points.cols(); ++i) {
      const int a = assignment[static_cast<std::size_t>(i)];
      sums.col(a) += points.col(i);
      ++counts[static_cast<std::size_t>(a)];
    }
    Matrix next = m.centers;
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        next.col(c) = sums.col(c) / counts[static_cast<std::size_t>(c)];
      } else {
        // Re-seed at the point farthest from its assigned center.
        Eigen::Index far = 0;
        d2.maxCoeff(&far);
        next.col(c) = points.col(far);
      }
    }
    const double shift = (next - m.centers).colwise().norm().maxCoeff();
    m.centers = std::move(next);
    m.iterations = it + 1;
    if (shift < 1e-8) break;
  }
  m.inertia_history.push_back(kmeans_inertia(points, m.centers));
  return m;
}

// ---- GMM ----

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// log N(x | mean, cov) for every column, via a Cholesky factor.
bool log_gaussian(const Matrix& points, const Vector& mean, const Matrix& cov, Eigen::RowVectorXd& out) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) return false;
  const Matrix l = llt.matrixL();
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  if (!std::isfinite(log_det)) return false;
  const Matrix z = l.triangularView<Eigen::Lower>().solve(points.colwise() - mean);
  const double d = static_cast<double>(points.rows());
  out = -0.5 * (z.colwise().squaredNorm().array() + d * kLog2Pi + log_det);
  return true;
}

// Row-wise log-sum-exp over components: k x n -> 1 x n.
Eigen::RowVectorXd log_sum_exp(const Matrix& a) {
  const Eigen::RowVectorXd mx = a.colwise().maxCoeff();
  return mx.array() + (a.rowwise() - mx).array().exp().colwise().sum().log();
}

bool component_log_densities(const GmmModel& m, const Matrix& points, Matrix& out) {
  const auto k = static_cast<Eigen::Index>(m.weights.size());
  out.resize(k, points.cols());
  Eigen::RowVectorXd row;
  for (Eigen::Index c = 0; c < k; ++c) {
    if (!log_gaussian(points, m.means[static_cast<std::size_t>(c)],
                      m.covariances[static_cast<std::size_t>(c)], row)) {
      return false;
    }
    out.row(c) = row.array() + std::log(m.weights[static_cast<std::size_t>(c)]);
  }
  return true;
}

constexpr double kCovReg = 1e-6;

bool em_attempt(const Matrix& points, int k, std::uint64_t seed, GmmModel& m) {
  const Eigen::Index d = points.rows();
  const Eigen::Index n = points.cols();
  const double nd = static_cast<double>(n);
  Rng rng(seed);
  const Matrix init = kmeanspp_seed(points, k, rng);
  const Vector mu = points.rowwise().mean();
  const Matrix centered = points.colwise() - mu;
  const Matrix global_cov = centered * centered.transpose() / nd + kCovReg * Matrix::Identity(d, d);
  m = GmmModel{};
  for (int c = 0; c < k; ++c) {
    m.weights.push_back(1.0 / k);
    m.means.push_back(init.col(c));
    m.covariances.push_back(global_cov);
  }
  Matrix logp;
  constexpr int kMaxIter = 500;
  for (int it = 0; it < kMaxIter; ++it) {
    if (!component_log_densities(m, points, logp)) return false;
    const Eigen::RowVectorXd lse = log_sum_exp(logp);
    const double ll = lse.sum();
    if (!std::isfinite(ll)) return false;
    if (!m.log_likelihood_history.empty() && ll - m.log_likelihood_history.back() < 1e-8) {
      m.log_likelihood_history.push_back(ll);
      return true;
    }
    m.log_likelihood_history.push_back(ll);
    const Matrix resp = (logp.rowwise() - lse).array().exp();
    for (int c = 0; c < k; ++c) {
      const double nk = resp.row(c).sum();
      if (!(nk > 0.0)) return false;
      m.weights[static_cast<std::size_t>(c)] = nk / nd;
      const Vector mean = points * resp.row(c).transpose() / nk;
      const Matrix diff = points.colwise() - mean;
      Matrix cov = (diff.array().rowwise() * resp.row(c).array()).matrix() * diff.transpose() / nk;
      cov += kCovReg * Matrix::Identity(d, d);
      m.means[static_cast<std::size_t>(c)] = mean;
      m.covariances[static_cast<std::size_t>(c)] = cov;
    }
  }
  if (!component_log_densities(m, points, logp)) return false;
  m.log_likelihood_history.push_back(log_sum_exp(logp).sum());
  return std::isfinite(m.log_likelihood_history.back());
}

}  // namespace

Eigen::RowVectorXd GmmModel::score(const Matrix& points) const {
  Matrix logp;
  if (!component_log_densities(*this, points, logp)) {
    throw NumericError("GMM covariance is not positive definite");
  }
  return log_sum_exp(logp);
}

Matrix GmmModel::responsibilities(const Matrix& points) const {
  Matrix logp;
  if (!component_log_densities(*this, points, logp)) {
    throw NumericError("GMM covariance is not positive definite");
  }
  return (logp.rowwise() - log_sum_exp(logp)).array().exp();
}

GmmModel fit_gmm_em(const Matrix& points, int k, std::uint64_t seed) {
  if (k < 1) throw ConfigError("GMM needs k >= 1");
  if (points.cols() < k) throw ConfigError("GMM needs at least k points");
  constexpr int kMaxRestarts = 5;
  GmmModel m;
  for (int attempt = 0; attempt <= kMaxRestarts; ++attempt) {
    if (em_attempt(points, k, derive_seed(seed, static_cast<std::uint64_t>(attempt)), m)) {
      m.restarts = attempt;
      return m;
    }
  }
  throw NumericError("GMM EM hit a singular covariance on every restart");
}

// ---- NCE discriminator ----

Box expanded_bounding_box(const Matrix& points, double margin) {
  if (points.cols() < 1) throw ConfigError("bounding box of an empty point set");
  Box b;
  b.min = points.rowwise().minCoeff();
  b.max = points.rowwise().maxCoeff();
  const Eigen::Vector2d extent = b.max - b.min;
  b.min -= margin * extent;
  b.max += margin * extent;
  return b;
}

bool accept_negative(const ConceptConfig& config, const Eigen::Vector2d& u) {
  if (!std::isfinite(config.epsilon_fraction)) return true;
  for (const auto& g : config.clusters) {
    if (g.pdf(u) >= config.epsilon_fraction * g.mode_density()) return false;
  }
  return true;
}

UniformNegatives sample_uniform_negatives(const ConceptConfig& config, const Box& box,
                                          std::size_t count, Rng& rng) {
  UniformNegatives out;
  out.points.resize(2, static_cast<Eigen::Index>(count));
  std::uniform_real_distribution<double> ux(box.min.x(), box.max.x());
  std::uniform_real_distribution<double> uy(box.min.y(), box.max.y());
  std::size_t accepted = 0;
  while (accepted < count) {
    const double x = ux(rng);
    const double y = uy(rng);
    const Eigen::Vector2d u(x, y);
    ++out.drawn;
    if (accept_negative(config, u)) {
      out.points.col(static_cast<Eigen::Index>(accepted++)) = u;
    } else if (out.drawn >= 10000 &&
               static_cast<double>(accepted) < 1e-3 * static_cast<double>(out.drawn)) {
      throw ConfigError("epsilon too strict: more than 99.9% of uniform negatives rejected");
    }
  }
  return out;
}

namespace {

Matrix scale_to_box(const Matrix& points, const Box& box) {
  const Eigen::Array2d extent = (box.max - box.min).array().max(1e-12);
  return ((points.colwise() - box.min).array().colwise() / extent).matrix();
}

}  // namespace

Eigen::RowVectorXd NceDiscriminator::score(const Matrix& points) const {
  return mlp.forward(scale_to_box(points, box)).row(0);
}

NceDiscriminator nce_concept(const Matrix& nominal, const ConceptConfig& config, Rng& rng) {
  config.validate();
  NceDiscriminator disc;
  disc.box = expanded_bounding_box(nominal, config.box_margin);
  const auto n_neg = static_cast<std::size_t>(
      std::llround(config.nce.negatives_per_nominal * static_cast<double>(nominal.cols())));
  const auto negs = sample_uniform_negatives(config, disc.box, std::max<std::size_t>(n_neg, 1), rng);

  const Eigen::Index n_pos = nominal.cols();
  const Eigen::Index n = n_pos + negs.points.cols();
  Matrix x(2, n);
  x.leftCols(n_pos) = scale_to_box(nominal, disc.box);
  x.rightCols(negs.points.cols()) = scale_to_box(negs.points, disc.box);
  Matrix y = Matrix::Zero(1, n);
  y.leftCols(n_pos).setOnes();

  disc.mlp = nn::Mlp(2, [&] {
    auto sizes = config.nce.hidden;
    sizes.push_back(1);
    return sizes;
  }(), nn::Activation::tanh, nn::Activation::sigmoid, 0.0);
  disc.mlp.init(rng);
  nn::AdamState opt(std::as_const(disc.mlp).params());
  nn::MlpGrad grad = disc.mlp.make_grad();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto bs = static_cast<Eigen::Index>(config.nce.batch_size);
  for (int epoch = 0; epoch < config.nce.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (Eigen::Index start = 0; start < n; start += bs) {
      const Eigen::Index m = std::min(bs, n - start);
      Matrix xb(2, m);
      Matrix yb(1, m);
      for (Eigen::Index i = 0; i < m; ++i) {
        xb.col(i) = x.col(order[static_cast<std::size_t>(start + i)]);
        yb(0, i) = y(0, order[static_cast<std::size_t>(start + i)]);
      }
      nn::Mlp::Tape tape;
      const Matrix p = disc.mlp.forward(xb, &tape);
      const auto loss = nn::bce_loss(yb, p);
      total += loss.value * static_cast<double>(m);
      grad.zero();
      disc.mlp.backward(tape, loss.grad, grad);
      nn::adam_step(opt, disc.mlp.params(), std::as_const(grad).params(), config.nce.learning_rate);
    }
    disc.loss_history.push_back(total / static_cast<double>(n));
  }
  return disc;
}

// ---- benchmark ----

namespace {

double ap_of(const Eigen::RowVectorXd& scores, const std::vector<char>& labels,
             eval::Orientation orientation) {
  std::unique_ptr<bool[]> flags(new bool[labels.size()]);
  for (std::size_t i = 0; i < labels.size(); ++i) flags[i] = labels[i] != 0;
  return eval::average_precision(std::span<const double>(scores.data(), labels.size()),
                                 std::span<const bool>(flags.get(), labels.size()), orientation);
}

}  // namespace

ConceptRun run_concept_seed(const ConceptConfig& config, std::uint64_t seed) {
  ConceptRun run;
  run.seed = seed;
  Rng train_rng(derive_seed(seed, "concept/train"));
  Rng test_rng(derive_seed(seed, "concept/test"));
  Rng nce_rng(derive_seed(seed, "concept/nce"));
  const auto train = gen_concept_data(config, train_rng);
  const auto test = gen_concept_data(config, test_rng);
  const Matrix nominal = train.nominal();

  using eval::Orientation;
  // Distance: large = anomalous. Likelihood / posterior: small = anomalous.
  const auto km2 = fit_kmeans(nominal, 2, derive_seed(seed, "concept/kmeans2"));
  run.kmeans2 = ap_of(km2.score(test.points), test.is_anomaly, Orientation::anomaly_high_score);
  const auto km1 = fit_kmeans(nominal, 1, derive_seed(seed, "concept/kmeans1"));
  run.kmeans1 = ap_of(km1.score(test.points), test.is_anomaly, Orientation::anomaly_high_score);
  const auto gmm = fit_gmm_em(nominal, 2, derive_seed(seed, "concept/gmm2"));
  run.gmm2 = ap_of(gmm.score(test.points), test.is_anomaly, Orientation::anomaly_low_score);
  const auto disc = nce_concept(nominal, config, nce_rng);
  run.nce = ap_of(disc.score(test.points), test.is_anomaly, Orientation::anomaly_low_score);
  return run;
}

ConceptBenchResult run_concept_bench(const ConceptConfig& config) {
  config.validate();
  ConceptBenchResult res;
  res.runs.resize(static_cast<std::size_t>(config.seeds));
  parallel_for(res.runs.size(), [&](std::size_t i) {
    res.runs[i] = run_concept_seed(config, derive_seed(derive_seed(config.seed, "concept/seed"), i));
  });
  const std::pair<const char*, double ConceptRun::*> methods[] = {
      {"GMM k=2", &ConceptRun::gmm2},
      {"K-means k=2", &ConceptRun::kmeans2},
      {"K-means k=1", &ConceptRun::kmeans1},
      {"NCE", &ConceptRun::nce},
  };
  for (const auto& [name, field] : methods) {
    ConceptRow row;
    row.method = name;
    for (const auto& r : res.runs) row.ap.push_back(r.*field);
    const auto ms = eval::mean_sd(row.ap);
    row.mean = ms.mean;
    row.sd = ms.sd;
    res.rows.push_back(std::move(row));
  }
  return res;
}

const ConceptRow& ConceptBenchResult::row(const std::string& method) const {
  for (const auto& r : rows) {
    if (r.method == method) return r;
  }
  throw ConfigError("no concept-bench method named '" + method + "'");
}

std::string ConceptBenchResult::per_seed_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "method,seed,ap\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < runs.size(); ++i) {
      os << row.method << ',' << runs[i].seed << ',' << row.ap[i] << '\n';
    }
  }
  return os.str();
}

std::string ConceptBenchResult::summary_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "method,mean_ap,sd_ap,seeds\n";
  for (const auto& row : rows) {
    os << row.method << ',' << row.mean << ',' << row.sd << ',' << row.ap.size() << '\n';
  }
  return os.str();
}

void write_points_csv(std::ostream& out, const LabeledPoints& data) {
  out.precision(17);
  out << "x,y,label\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    out << data.points(0, c) << ',' << data.points(1, c) << ','
        << (data.is_anomaly[i] ? "anomaly" : "nominal") << '\n';
  }
}

}  // namespace chadkit::concept_bench
