#pragma once

// Structured heterogeneous toy data: every row belongs to a hidden profile
// that fixes which values its categorical fields take and where its
// continuous fields sit. Used by the end-to-end tests, the demo data and the
// benchmarks.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "chadkit/data.hpp"

namespace chadkit::synth {

struct StructuredConfig {
  std::size_t rows = 5000;
  std::vector<int> arities{10, 20, 35, 50};
  int continuous = 6;
  int profiles = 8;
  // Noise around each profile's continuous centre. With log_normal the
  // centre and noise live on the log scale (right-skewed positive values,
  // like trade quantities and prices); otherwise on a [0,1] scale.
  double continuous_sd = 0.04;
  bool log_normal = true;
  // Probability that a categorical cell ignores its profile.
  double categorical_noise = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

// Raw (unnormalized) dataset; all rows labeled nominal. Categorical values
// are named "<field>_v<index>", continuous values are affinely rescaled so
// each field has its own range.
data::Dataset make_structured_dataset(const StructuredConfig& config);

// Writes the header and every record with decoded category strings and a
// trailing label column ("nominal" / "anomaly") when the schema has one.
void write_dataset_csv(std::ostream& out, const data::Dataset& dataset);

}  // namespace chadkit::synth
