#include <gtest/gtest.h>

#include <numeric>

#include "chadkit/autoencoder.hpp"
#include "chadkit/errors.hpp"
#include "test_support.hpp"

using namespace chadkit;
using namespace chadkit::model;

namespace {

Autoencoder make_ae(const std::vector<int>& arities, int r, const std::vector<int>& layers,
                    std::uint64_t seed, int threshold = 32) {
  Autoencoder ae(make_transform_spec(arities, r, threshold), arities, layers, 0.0);
  Rng rng(seed);
  ae.init(rng);
  return ae;
}

// Gradient of L_R with x_t held fixed, by central differences.
void check_lr_gradient(Autoencoder& ae, const Batch& batch) {
  const Matrix target = ae.forward(batch, nullptr).transformed;
  auto grad = ae.make_grad();
  reconstruction_loss(ae, batch, nullptr, &grad);
  auto f = [&] { return nn::mse_loss(target, ae.forward(batch, nullptr).reconstruction).value; };
  const auto r = nn::grad_check(f, ae.params(), std::as_const(grad).params(), 60, 1e-6, 17, 1e-8);
  EXPECT_LT(r.max_rel_error, 1e-4);
}

}  // namespace

TEST(FieldTransform, EmbeddingSizes) {
  EXPECT_EQ(default_embedding_dim(1), 2);
  EXPECT_EQ(default_embedding_dim(10), 5);
  EXPECT_EQ(default_embedding_dim(16), 5);
  EXPECT_EQ(default_embedding_dim(17), 6);
  EXPECT_EQ(default_embedding_dim(961), 32);
  EXPECT_EQ(default_embedding_dim(5000), 32);
}

TEST(FieldTransform, ContinuousModeSwitchesAboveThreshold) {
  const auto small = make_transform_spec({10, 20}, 32);
  EXPECT_EQ(small.continuous_mode, ContinuousMode::identity);
  EXPECT_EQ(small.transformed_dim(), 5 + 6 + 32);
  const auto big = make_transform_spec({10, 20}, 33);
  EXPECT_EQ(big.continuous_mode, ContinuousMode::linear);
  EXPECT_EQ(big.transformed_dim(), 5 + 6 + 32);
  EXPECT_THROW(make_transform_spec({10, 20}, 3, 32, 32, {4}), ConfigError);
}

TEST(FieldTransform, ConcatenatesEmbeddingColumnsAndContinuous) {
  auto ds = fixtures::toy_dataset({4, 9}, 3, 5, 1);
  FieldTransform t(make_transform_spec({4, 9}, 3), {4, 9});
  Rng rng(2);
  t.init(rng);
  const auto& rec = ds.records[3];
  const Vector xt = t.forward(rec);
  ASSERT_EQ(xt.size(), 3 + 4 + 3);
  EXPECT_EQ(xt.segment(0, 3), t.embeddings()[0].col(rec.categories[0]));
  EXPECT_EQ(xt.segment(3, 4), t.embeddings()[1].col(rec.categories[1]));
  for (int j = 0; j < 3; ++j) EXPECT_EQ(xt(7 + j), rec.continuous[j]);
}

TEST(FieldTransform, RejectsMismatchedBatches) {
  FieldTransform t(make_transform_spec({4, 9}, 3), {4, 9});
  Rng rng(2);
  t.init(rng);
  auto ds = fixtures::toy_dataset({4}, 3, 2, 1);
  EXPECT_THROW(t.forward(make_batch(ds.records)), SchemaError);
  auto ok = fixtures::toy_dataset({4, 9}, 3, 2, 1);
  ok.records[1].categories[1] = 9;
  EXPECT_THROW(t.forward(make_batch(ok.records)), SchemaError);
}

TEST(Autoencoder, Dimensions) {
  const auto ae = make_ae({10, 20}, 6, {64, 32, 16}, 1);
  EXPECT_EQ(ae.transformed_dim(), 5 + 6 + 6);
  EXPECT_EQ(ae.latent_dim(), 16);
  ASSERT_EQ(ae.decoder().layers().size(), 3u);
  EXPECT_EQ(ae.decoder().layers()[0].out_dim(), 32);
  EXPECT_EQ(ae.decoder().layers()[1].out_dim(), 64);
  EXPECT_EQ(ae.decoder().layers()[2].out_dim(), 17);
  auto ds = fixtures::toy_dataset({10, 20}, 6, 9, 3);
  const auto p = ae.forward(make_batch(ds.records), nullptr);
  EXPECT_EQ(p.latent.rows(), 16);
  EXPECT_EQ(p.latent.cols(), 9);
  EXPECT_EQ(p.reconstruction.rows(), 17);
  EXPECT_LT(p.latent.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_GT(p.reconstruction.minCoeff(), 0.0);
  EXPECT_LT(p.reconstruction.maxCoeff(), 1.0);
}

TEST(Autoencoder, ZeroWeightsReconstructOneHalf) {
  auto ae = make_ae({3, 5}, 4, {8, 4}, 2);
  for (auto p : ae.params()) std::fill(p.begin(), p.end(), 0.0);
  auto ds = fixtures::toy_dataset({3, 5}, 4, 6, 4);
  const auto batch = make_batch(ds.records);
  const auto pass = ae.forward(batch, nullptr);
  EXPECT_TRUE(pass.latent.isZero());
  EXPECT_TRUE((pass.reconstruction.array() == 0.5).all());
  // Embeddings are zero too (widths 3 and 4), so x_t is zero except for the
  // raw continuous block; L_R is the mean of (x_t - 0.5)^2 over every element.
  double sum = 0;
  for (const auto& r : ds.records) {
    sum += (3 + 4) * 0.25;
    for (double v : r.continuous) sum += (v - 0.5) * (v - 0.5);
  }
  const double expected = sum / (6.0 * (3 + 4 + 4));
  EXPECT_NEAR(reconstruction_loss(ae, batch, nullptr), expected, 1e-15);
}

TEST(Autoencoder, ReconstructionGradientIdentityContinuous) {
  auto ae = make_ae({4, 7, 3}, 5, {12, 6}, 5);
  auto ds = fixtures::toy_dataset({4, 7, 3}, 5, 11, 6);
  check_lr_gradient(ae, make_batch(ds.records));
}

TEST(Autoencoder, ReconstructionGradientLinearContinuous) {
  auto ae = make_ae({4}, 6, {8, 3}, 7, /*threshold=*/4);
  ASSERT_TRUE(ae.transform().continuous_layer());
  auto ds = fixtures::toy_dataset({4}, 6, 7, 8);
  check_lr_gradient(ae, make_batch(ds.records));
}

TEST(Autoencoder, EncoderParamsExcludeDecoder) {
  auto ae = make_ae({4, 7}, 5, {12, 6}, 5);
  const auto enc = ae.encoder_params();
  const auto all = std::as_const(ae).params();
  auto count = [](const nn::ConstParamList& l) {
    return std::accumulate(l.begin(), l.end(), std::size_t{0},
                           [](std::size_t s, auto sp) { return s + sp.size(); });
  };
  std::size_t dec = 0;
  for (const auto& l : ae.decoder().layers()) dec += l.weights.size() + l.bias.size();
  EXPECT_EQ(count(enc) + dec, count(all));
}

TEST(Autoencoder, DropoutOnlyWithRng) {
  Autoencoder ae(make_transform_spec({4}, 4), {4}, {8, 4}, 0.5);
  Rng rng(1);
  ae.init(rng);
  auto ds = fixtures::toy_dataset({4}, 4, 5, 2);
  const auto batch = make_batch(ds.records);
  EXPECT_EQ(ae.forward(batch, nullptr).latent, ae.latents(batch));
  Rng d(3);
  EXPECT_NE(ae.forward(batch, &d).latent, ae.latents(batch));
}
