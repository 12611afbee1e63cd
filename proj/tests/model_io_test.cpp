#include <gtest/gtest.h>

#include <bit>
#include <cstring>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "chadkit/errors.hpp"
#include "chadkit/model.hpp"
#include "phase_contract.hpp"
#include "test_support.hpp"

using namespace chadkit;
using namespace chadkit::model;

namespace {

std::uint64_t read_u64(const std::string& s, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[pos + i]);
  return v;
}

ChadModel sample_model(int r = 3) {
  const auto ds = fixtures::toy_dataset({4, 7}, r, 5, 1);
  ModelConfig c;
  c.encoder_layers = {10, 4};
  return fixtures::toy_model(ds, 21, c);
}

}  // namespace

TEST(ModelFormat, RoundTripIsBitwise) {
  const auto m = sample_model();
  const auto bytes = serialize_model(m);
  const auto back = deserialize_model(bytes);
  EXPECT_EQ(fixtures::flatten(std::as_const(back.autoencoder).params()),
            fixtures::flatten(std::as_const(m.autoencoder).params()));
  EXPECT_EQ(fixtures::flatten(back.estimator.mlp().params()),
            fixtures::flatten(m.estimator.mlp().params()));
  EXPECT_EQ(back.schema_hash(), m.schema_hash());
  EXPECT_EQ(back.vocabularies[1].values(), m.vocabularies[1].values());
  EXPECT_EQ(back.config.encoder_layers, m.config.encoder_layers);
  EXPECT_EQ(serialize_model(back), bytes);
  const auto ds = fixtures::toy_dataset({4, 7}, 3, 20, 2);
  const auto batch = make_batch(ds.records);
  EXPECT_EQ(back.score(batch), m.score(batch));
}

TEST(ModelFormat, LayoutReadableWithoutTheLibrary) {
  const auto m = sample_model();
  const auto bytes = serialize_model(m);
  ASSERT_EQ(std::memcmp(bytes.data(), "CHADKIT\0", 8), 0);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), kModelFormatVersion);
  const auto h = read_u64(bytes, 12);
  const auto header = nlohmann::json::parse(bytes.substr(20, h));
  EXPECT_EQ(header["format"], "chadkit-model");
  EXPECT_EQ(header["latent_dim"], 4);
  const auto n = read_u64(bytes, 20 + h);
  ASSERT_EQ(bytes.size(), 28 + h + n * 8);
  std::size_t total = 0;
  for (const auto& s : header["tensor_sizes"]) total += s.get<std::size_t>();
  EXPECT_EQ(total, n);
  // First payload value: embedding table 0, entity 0, dimension 0.
  EXPECT_EQ(std::bit_cast<double>(read_u64(bytes, 28 + h)),
            m.autoencoder.transform().embeddings()[0](0, 0));
}

TEST(ModelFormat, CorruptFilesAreMismatches) {
  const auto bytes = serialize_model(sample_model());
  EXPECT_THROW(deserialize_model(bytes.substr(0, bytes.size() - 3)), ModelMismatchError);
  EXPECT_THROW(deserialize_model(bytes.substr(0, 10)), ModelMismatchError);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_model(bad), ModelMismatchError);
  bad = bytes;
  bad[8] = 99;
  EXPECT_THROW(deserialize_model(bad), ModelMismatchError);
  EXPECT_THROW(deserialize_model(bytes + "extra"), ModelMismatchError);
  EXPECT_THROW(load_model("/nonexistent/model.chad"), ConfigError);
}

TEST(ModelFormat, SaveAndLoad) {
  const auto dir = fixtures::temp_dir("model_io");
  const auto m = sample_model(40);  // linear continuous transform
  ASSERT_TRUE(m.autoencoder.transform().continuous_layer());
  save_model(m, (dir / "m.chad").string());
  const auto back = load_model((dir / "m.chad").string());
  EXPECT_TRUE(back.autoencoder.transform().continuous_layer());
  EXPECT_EQ(serialize_model(back), serialize_model(m));
}

TEST(SchemaHash, SensitiveToNamesKindsAndArities) {
  const auto s = fixtures::toy_schema(2, 3);
  const auto base = schema_hash(s, {4, 7});
  EXPECT_EQ(base, schema_hash(fixtures::toy_schema(2, 3), {4, 7}));
  EXPECT_NE(base, schema_hash(s, {4, 8}));
  EXPECT_NE(base, schema_hash(fixtures::toy_schema(2, 4), {4, 7}));
  EXPECT_NE(base, schema_hash(fixtures::toy_schema(3, 2), {4, 7, 2}));
}
