#pragma once

// Negative sample generation for heterogeneous records: arity-dampened
// categorical substitution on at most half of the categorical fields plus
// out-of-range shifts on a quarter of the continuous fields in each
// direction.

#include <cstdint>
#include <vector>

#include "chadkit/data.hpp"
#include "chadkit/rng.hpp"

namespace chadkit::negsample {

struct NegSamplerConfig {
  int negatives_per_record = 10;  // m
  double delta = 0.5;             // noise deviation
  double dampening = 0.75;
};

// p_w = q_w / sum q with q_w = (a_w / sum a)^dampening.
std::vector<double> category_probs(const std::vector<int>& arities, double dampening = 0.75);

// Which fields a single negative touched and by how much.
struct PerturbationTrace {
  std::vector<int> categorical_fields;  // in selection order
  std::vector<int> up_fields;           // j1
  std::vector<int> down_fields;         // j2
  std::vector<double> up_increments;
  std::vector<double> down_increments;
};

// Picks `count` distinct fields (without replacement, proportional to probs,
// skipping fields of arity < 2) and replaces each value with a uniformly
// drawn different value of the same field. Fewer fields are touched only
// when fewer than `count` fields have arity >= 2.
data::Record perturb_categoricals(const data::Record& record, int count,
                                  const std::vector<double>& probs,
                                  const std::vector<int>& arities, Rng& rng,
                                  PerturbationTrace* trace = nullptr);

// floor(r/4) fields get + (U(0,1) + delta) and a disjoint floor(r/4) fields
// get + (U(0,1) - delta), with U on the open interval. No clamping.
std::vector<double> perturb_continuous(const std::vector<double>& values, double delta, Rng& rng,
                                       PerturbationTrace* trace = nullptr);

// Validates that the sampler can perturb records of this shape: at least
// one categorical field with arity >= 2, or r >= 4.
void validate_sampler_schema(const std::vector<int>& arities, int continuous_count);

class NegativeSampler {
 public:
  NegativeSampler(NegSamplerConfig config, std::vector<int> arities, int continuous_count);

  // m negatives of record; each draws its own number of categorical fields
  // uniformly from {1, ..., max(1, floor(k/2))}.
  std::vector<data::Record> generate(const data::Record& record, Rng& rng,
                                     std::vector<PerturbationTrace>* traces = nullptr) const;

  // Deterministic per-record stream: negatives for (seed, epoch, record.id)
  // do not depend on batch order or thread placement.
  std::vector<data::Record> generate(const data::Record& record, std::uint64_t seed,
                                     std::uint64_t epoch) const;

  const NegSamplerConfig& config() const { return config_; }
  const std::vector<double>& probs() const { return probs_; }
  int max_categorical_fields() const;

 private:
  NegSamplerConfig config_;
  std::vector<int> arities_;
  int continuous_count_;
  std::vector<double> probs_;
};

std::vector<data::Record> generate_negatives(const data::Record& record,
                                             const NegSamplerConfig& config,
                                             const std::vector<int>& arities, Rng& rng);

}  // namespace chadkit::negsample
