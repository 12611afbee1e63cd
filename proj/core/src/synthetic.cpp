#include "chadkit/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "chadkit/csv.hpp"
#include "chadkit/errors.hpp"
#include "chadkit/rng.hpp"

namespace chadkit::synth {

void StructuredConfig::validate() const {
  if (rows < 1) throw ConfigError("synthetic data needs at least one row");
  if (profiles < 1) throw ConfigError("synthetic data needs at least one profile");
  for (int a : arities) {
    if (a < 1) throw ConfigError("synthetic arities must be >= 1");
  }
  if (continuous < 0) throw ConfigError("continuous field count must be >= 0");
  if (!(continuous_sd >= 0.0)) throw ConfigError("continuous_sd must be >= 0");
  if (!(categorical_noise >= 0.0 && categorical_noise <= 1.0)) {
    throw ConfigError("categorical_noise must lie in [0,1]");
  }
}

data::Dataset make_structured_dataset(const StructuredConfig& config) {
  config.validate();
  Rng rng(derive_seed(config.seed, "synthetic/structured"));
  const std::size_t k = config.arities.size();
  const auto r = static_cast<std::size_t>(config.continuous);
  const auto p = static_cast<std::size_t>(config.profiles);

  std::vector<data::FieldSpec> cols;
  for (std::size_t w = 0; w < k; ++w) cols.push_back({"cat" + std::to_string(w), data::FieldKind::categorical});
  for (std::size_t j = 0; j < r; ++j) cols.push_back({"num" + std::to_string(j), data::FieldKind::continuous});
  cols.push_back({"label", data::FieldKind::label});

  data::Dataset ds;
  ds.schema = data::RecordSchema(cols);

  // Each value of each field belongs to exactly one profile, so every value
  // occurs once enough rows are drawn.
  std::vector<std::vector<std::vector<int>>> home(k, std::vector<std::vector<int>>(p));
  for (std::size_t w = 0; w < k; ++w) {
    std::vector<int> values(static_cast<std::size_t>(config.arities[w]));
    std::iota(values.begin(), values.end(), 0);
    std::shuffle(values.begin(), values.end(), rng);
    for (std::size_t i = 0; i < values.size(); ++i) home[w][i % p].push_back(values[i]);
    // Fields with fewer values than profiles share values across profiles.
    for (std::size_t z = 0; z < p; ++z) {
      if (home[w][z].empty()) home[w][z].push_back(values[z % values.size()]);
    }
  }
  std::uniform_real_distribution<double> centre(0.15, 0.85);
  std::vector<std::vector<double>> mu(p, std::vector<double>(r));
  for (auto& row : mu) {
    for (auto& m : row) m = centre(rng);
  }
  std::vector<double> lo(r), span(r);
  for (std::size_t j = 0; j < r; ++j) {
    lo[j] = 10.0 * static_cast<double>(j) - 5.0;
    span[j] = 50.0 * static_cast<double>(j + 1);
  }

  // Vocabularies list values in index order so encoded index == value id.
  ds.vocabularies.resize(k);
  for (std::size_t w = 0; w < k; ++w) {
    for (int v = 0; v < config.arities[w]; ++v) {
      ds.vocabularies[w].add("cat" + std::to_string(w) + "_v" + std::to_string(v));
    }
  }

  std::uniform_int_distribution<std::size_t> pick_profile(0, p - 1);
  std::normal_distribution<double> noise(0.0, config.continuous_sd);
  std::bernoulli_distribution stray(config.categorical_noise);
  ds.records.reserve(config.rows);
  for (std::size_t i = 0; i < config.rows; ++i) {
    data::Record rec;
    rec.id = i;
    rec.label = data::Label::nominal;
    const std::size_t z = pick_profile(rng);
    for (std::size_t w = 0; w < k; ++w) {
      if (stray(rng)) {
        std::uniform_int_distribution<int> any(0, config.arities[w] - 1);
        rec.categories.push_back(any(rng));
      } else {
        const auto& opts = home[w][z];
        std::uniform_int_distribution<std::size_t> pick(0, opts.size() - 1);
        rec.categories.push_back(opts[pick(rng)]);
      }
    }
    for (std::size_t j = 0; j < r; ++j) {
      if (config.log_normal) {
        // Log-scale centres spread over [0.45, 2.55] (values ~1.6 to ~13).
        rec.continuous.push_back(span[j] * std::exp(3.0 * mu[z][j] + noise(rng)));
      } else {
        rec.continuous.push_back(lo[j] + span[j] * (mu[z][j] + noise(rng)));
      }
    }
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

void write_dataset_csv(std::ostream& out, const data::Dataset& dataset) {
  out.precision(17);
  std::vector<std::string> header;
  for (const auto& c : dataset.schema.columns()) {
    if (c.kind == data::FieldKind::ignore) continue;
    header.push_back(c.name);
  }
  csv::write_row(out, header);
  for (const auto& rec : dataset.records) {
    std::vector<std::string> row;
    std::size_t w = 0, j = 0;
    for (const auto& c : dataset.schema.columns()) {
      switch (c.kind) {
        case data::FieldKind::categorical:
          row.push_back(dataset.vocabularies[w].decode(rec.categories[w]));
          ++w;
          break;
        case data::FieldKind::continuous: {
          std::ostringstream os;
          os.precision(17);
          os << rec.continuous[j++];
          row.push_back(os.str());
          break;
        }
        case data::FieldKind::label:
          row.push_back(rec.label && *rec.label == data::Label::anomaly ? "anomaly" : "nominal");
          break;
        case data::FieldKind::ignore:
          break;
      }
    }
    csv::write_row(out, row);
  }
}

}  // namespace chadkit::synth
