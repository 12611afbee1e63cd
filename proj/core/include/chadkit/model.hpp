#pragma once

// A trained detector: schema, vocabularies and normalization together with
// the autoencoder and estimator weights, so scoring needs nothing else.

#include <cstdint>
#include <string>
#include <vector>

#include "chadkit/autoencoder.hpp"
#include "chadkit/data.hpp"
#include "chadkit/estimator.hpp"

namespace chadkit::model {

struct ModelConfig {
  std::vector<int> encoder_layers{64, 32, 16};
  std::vector<int> embedding_dims;  // empty: default per arity
  int continuous_threshold = 32;
  int continuous_dim = 32;
  double autoencoder_dropout = 0.2;
  double estimator_dropout = 0.1;
};

struct ChadModel {
  data::RecordSchema schema;
  std::vector<data::Vocabulary> vocabularies;
  data::NormalizationStats normalization;
  ModelConfig config;
  Autoencoder autoencoder;
  Estimator estimator;

  static ChadModel create(const data::RecordSchema& schema,
                          std::vector<data::Vocabulary> vocabularies,
                          data::NormalizationStats normalization, const ModelConfig& config,
                          std::uint64_t init_seed);

  std::vector<int> arities() const;
  std::uint64_t schema_hash() const;

  // Inference-mode latents (p x B) and likelihood scores (1 x B).
  Matrix latents(const Batch& batch) const;
  Eigen::RowVectorXd score(const Batch& batch) const;
};

// FNV-1a 64 over field names, kinds and categorical arities.
std::uint64_t schema_hash(const data::RecordSchema& schema, const std::vector<int>& arities);

inline constexpr std::uint32_t kModelFormatVersion = 1;

// Binary layout (all integers little-endian):
//   8 bytes  magic "CHADKIT\0"
//   u32      format version
//   u64      header length H
//   H bytes  UTF-8 JSON header
//   u64      payload element count N
//   N * 8    IEEE-754 binary64 weights, little-endian
// See docs/model_format.md for the header fields and tensor order.
std::string serialize_model(const ChadModel& model);
ChadModel deserialize_model(const std::string& bytes);
void save_model(const ChadModel& model, const std::string& path);
ChadModel load_model(const std::string& path);

}  // namespace chadkit::model
