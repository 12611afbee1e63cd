#include "chadkit/negsampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "chadkit/errors.hpp"

namespace chadkit::negsample {

std::vector<double> category_probs(const std::vector<int>& arities, double dampening) {
  if (arities.empty()) throw ConfigError("category_probs: empty arity list");
  double total = 0.0;
  for (int a : arities) {
    if (a < 1) throw ConfigError("category_probs: arities must be >= 1");
    total += a;
  }
  std::vector<double> q;
  q.reserve(arities.size());
  for (int a : arities) q.push_back(std::pow(a / total, dampening));
  const double z = std::accumulate(q.begin(), q.end(), 0.0);
  for (double& v : q) v /= z;
  return q;
}

data::Record perturb_categoricals(const data::Record& record, int count,
                                  const std::vector<double>& probs,
                                  const std::vector<int>& arities, Rng& rng,
                                  PerturbationTrace* trace) {
  data::Record out = record;
  std::vector<double> weight(probs);
  for (std::size_t w = 0; w < arities.size(); ++w) {
    if (arities[w] < 2) weight[w] = 0.0;
  }
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int n = 0; n < count; ++n) {
    const double total = std::accumulate(weight.begin(), weight.end(), 0.0);
    if (total <= 0.0) break;
    const double target = u01(rng) * total;
    // Falls through to the last eligible field if rounding overshoots.
    std::size_t field = 0;
    double acc = 0.0;
    for (std::size_t w = 0; w < weight.size(); ++w) {
      if (weight[w] <= 0.0) continue;
      acc += weight[w];
      field = w;
      if (target < acc) break;
    }
    weight[field] = 0.0;

    const int arity = arities[field];
    const int old = record.categories[field];
    std::uniform_int_distribution<int> pick(0, arity - 2);
    int value = pick(rng);
    if (value >= old) ++value;
    out.categories[field] = value;
    if (trace) trace->categorical_fields.push_back(static_cast<int>(field));
  }
  return out;
}

std::vector<double> perturb_continuous(const std::vector<double>& values, double delta, Rng& rng,
                                       PerturbationTrace* trace) {
  std::vector<double> out = values;
  const std::size_t r = values.size();
  const std::size_t quarter = r / 4;
  if (quarter == 0) return out;
  std::vector<int> order(r);
  std::iota(order.begin(), order.end(), 0);
  // Partial Fisher-Yates: the first 2*quarter positions form j1 then j2.
  for (std::size_t i = 0; i < 2 * quarter; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, r - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  for (std::size_t i = 0; i < quarter; ++i) {
    const int f = order[i];
    const double n = uniform_open01(rng) + delta;
    out[static_cast<std::size_t>(f)] += n;
    if (trace) {
      trace->up_fields.push_back(f);
      trace->up_increments.push_back(n);
    }
  }
  for (std::size_t i = quarter; i < 2 * quarter; ++i) {
    const int f = order[i];
    const double n = uniform_open01(rng) - delta;
    out[static_cast<std::size_t>(f)] += n;
    if (trace) {
      trace->down_fields.push_back(f);
      trace->down_increments.push_back(n);
    }
  }
  return out;
}

void validate_sampler_schema(const std::vector<int>& arities, int continuous_count) {
  const bool any_categorical = std::any_of(arities.begin(), arities.end(),
                                           [](int a) { return a >= 2; });
  if (!any_categorical && continuous_count < 4) {
    throw ConfigError(
        "negative sampler cannot perturb this schema: it needs a categorical field "
        "with at least two values or at least four continuous fields");
  }
}

NegativeSampler::NegativeSampler(NegSamplerConfig config, std::vector<int> arities,
                                 int continuous_count)
    : config_(config), arities_(std::move(arities)), continuous_count_(continuous_count) {
  if (config_.negatives_per_record < 1) throw ConfigError("negatives per record must be >= 1");
  if (!(config_.delta > 0.0)) throw ConfigError("noise deviation delta must be > 0");
  validate_sampler_schema(arities_, continuous_count_);
  if (!arities_.empty()) probs_ = category_probs(arities_, config_.dampening);
}

int NegativeSampler::max_categorical_fields() const {
  const int k = static_cast<int>(arities_.size());
  return k == 0 ? 0 : std::max(1, k / 2);
}

std::vector<data::Record> NegativeSampler::generate(const data::Record& record, Rng& rng,
                                                    std::vector<PerturbationTrace>* traces) const {
  std::vector<data::Record> out;
  out.reserve(static_cast<std::size_t>(config_.negatives_per_record));
  const int max_fields = max_categorical_fields();
  for (int s = 0; s < config_.negatives_per_record; ++s) {
    PerturbationTrace trace;
    PerturbationTrace* tp = traces ? &trace : nullptr;
    data::Record neg = record;
    if (max_fields > 0) {
      std::uniform_int_distribution<int> pick(1, max_fields);
      neg = perturb_categoricals(record, pick(rng), probs_, arities_, rng, tp);
    }
    neg.continuous = perturb_continuous(record.continuous, config_.delta, rng, tp);
    neg.label = data::Label::anomaly;
    out.push_back(std::move(neg));
    if (traces) traces->push_back(std::move(trace));
  }
  return out;
}

std::vector<data::Record> NegativeSampler::generate(const data::Record& record, std::uint64_t seed,
                                                    std::uint64_t epoch) const {
  Rng rng(derive_seed(seed, epoch, record.id));
  return generate(record, rng);
}

std::vector<data::Record> generate_negatives(const data::Record& record,
                                             const NegSamplerConfig& config,
                                             const std::vector<int>& arities, Rng& rng) {
  const NegativeSampler sampler(config, arities, static_cast<int>(record.continuous.size()));
  return sampler.generate(record, rng);
}

}  // namespace chadkit::negsample
