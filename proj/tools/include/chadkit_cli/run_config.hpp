#pragma once

// JSON run configuration shared by every subcommand. Unknown keys are
// rejected and all validation failures are reported together.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chadkit/conceptbench.hpp"
#include "chadkit/data.hpp"
#include "chadkit/model.hpp"
#include "chadkit/synthetic.hpp"
#include "chadkit/trainer.hpp"

namespace chadkit::cli {

using json = nlohmann::ordered_json;

struct EvalSettings {
  double anomaly_fraction = 0.1;
  std::vector<double> vary_percentages{2, 4, 6, 8, 10};
  int vary_repeats = 5;
  bool noise_ablation = false;
  std::string ablation_train_data;
  std::vector<std::uint64_t> ablation_seeds;
};

struct VizSettings {
  std::string layer = "latent";  // or "penultimate"
};

struct DumpSettings {
  std::size_t records = 3;  // 0 = every record
};

struct SyntheticSettings {
  synth::StructuredConfig generator;
  std::size_t test_rows = 1000;
};

struct RunConfig {
  std::string schema;
  std::string data;
  std::string model_path;
  std::string out = "chadkit_out";
  std::optional<std::size_t> rare_min_count;
  data::UnseenPolicy unseen = data::UnseenPolicy::reject;
  bool clamp = false;
  std::uint64_t seed = 0;
  model::ModelConfig architecture;
  train::TrainSchedule schedule;
  EvalSettings eval;
  VizSettings viz;
  DumpSettings dump;
  SyntheticSettings synthetic;
  concept_bench::ConceptConfig concept_config = concept_bench::ConceptConfig::defaults();

  // Every field, defaults included.
  json to_json() const;
  // Throws ConfigError listing every problem found.
  static RunConfig from_json(const json& j);
  static RunConfig load(const std::string& path);
};

json seeds_json(std::uint64_t root);

}  // namespace chadkit::cli
