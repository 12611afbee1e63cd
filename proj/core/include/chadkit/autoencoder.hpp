#pragma once

// Field-aware asymmetric autoencoder. Each categorical field goes through its
// own embedding, the continuous block through an identity or linear map, and
// the concatenation x_t feeds a dense tanh encoder down to the latent vector.
// The decoder is a plain dense stack that reconstructs x_t.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "chadkit/data.hpp"
#include "chadkit/nn.hpp"
#include "chadkit/rng.hpp"

namespace chadkit::model {

using nn::Matrix;
using nn::Vector;

enum class ContinuousMode { identity, linear };

struct FieldTransformSpec {
  std::vector<int> embedding_dims;  // e_w per categorical field
  int continuous_count = 0;         // r
  ContinuousMode continuous_mode = ContinuousMode::identity;
  int continuous_dim = 0;           // output size of g in linear mode

  int continuous_output_dim() const {
    return continuous_mode == ContinuousMode::linear ? continuous_dim : continuous_count;
  }
  int transformed_dim() const;
};

// min(ceil(sqrt(arity)) + 1, 32)
int default_embedding_dim(int arity);

// Linear continuous transform iff r > threshold. Empty embedding_dims selects
// default_embedding_dim per field.
FieldTransformSpec make_transform_spec(const std::vector<int>& arities, int continuous_count,
                                       int threshold = 32, int linear_dim = 32,
                                       std::vector<int> embedding_dims = {});

// Records packed column-wise: categories is k x B, continuous is r x B.
struct Batch {
  Eigen::MatrixXi categories;
  Matrix continuous;

  Eigen::Index size() const { return std::max(categories.cols(), continuous.cols()); }
};

Batch make_batch(std::span<const data::Record> records);
Batch make_batch(std::span<const data::Record> records, std::span<const std::size_t> indices);

struct FieldTransformGrad {
  std::vector<Matrix> embeddings;
  std::optional<nn::DenseGrad> continuous;

  void zero();
};

class FieldTransform {
 public:
  FieldTransform() = default;
  FieldTransform(FieldTransformSpec spec, std::vector<int> arities);

  void init(Rng& rng);

  Matrix forward(const Batch& batch) const;
  Vector forward(const data::Record& record) const;
  void backward(const Batch& batch, const Matrix& d_xt, FieldTransformGrad& grad) const;

  FieldTransformGrad make_grad() const;
  nn::ParamList params();
  nn::ConstParamList params() const;

  const FieldTransformSpec& spec() const { return spec_; }
  const std::vector<int>& arities() const { return arities_; }

  // Embedding table of field w stored as e_w x a_w: column i is the
  // embedding of entity i.
  std::vector<Matrix>& embeddings() { return embeddings_; }
  const std::vector<Matrix>& embeddings() const { return embeddings_; }
  std::optional<nn::DenseLayer>& continuous_layer() { return continuous_; }
  const std::optional<nn::DenseLayer>& continuous_layer() const { return continuous_; }

 private:
  void check(const Batch& batch) const;

  FieldTransformSpec spec_;
  std::vector<int> arities_;
  std::vector<Matrix> embeddings_;
  std::optional<nn::DenseLayer> continuous_;
};

struct AutoencoderGrad {
  FieldTransformGrad transform;
  nn::MlpGrad encoder;
  nn::MlpGrad decoder;

  void zero();
  nn::ParamList params();
  nn::ConstParamList params() const;
};

class Autoencoder {
 public:
  struct Pass {
    Matrix transformed;  // x_t
    nn::Mlp::Tape encoder_tape;
    Matrix latent;       // x_e
    nn::Mlp::Tape decoder_tape;
    Matrix reconstruction;
  };

  Autoencoder() = default;
  Autoencoder(FieldTransformSpec spec, std::vector<int> arities,
              const std::vector<int>& encoder_layers, double dropout);

  void init(Rng& rng);

  // Full pass; the decoder is skipped when decode is false. dropout_rng null
  // means inference mode.
  Pass forward(const Batch& batch, Rng* dropout_rng, bool decode = true) const;

  Matrix encode(const Matrix& transformed) const;
  Matrix decode(const Matrix& latent) const;
  Matrix latents(const Batch& batch) const;

  // Backprop from dL/d(reconstruction) through the decoder; returns dL/d(latent).
  Matrix backward_decoder(const Pass& pass, const Matrix& d_reconstruction,
                          AutoencoderGrad& grad) const;
  // Backprop from dL/d(latent) through the encoder and field transforms.
  void backward_encoder(const Batch& batch, const Pass& pass, const Matrix& d_latent,
                        AutoencoderGrad& grad) const;

  AutoencoderGrad make_grad() const;
  nn::ParamList params();
  nn::ConstParamList params() const;
  // Field transforms + encoder only (the part feeding the latent vector).
  nn::ConstParamList encoder_params() const;

  int latent_dim() const { return static_cast<int>(encoder_.out_dim()); }
  int transformed_dim() const { return transform_.spec().transformed_dim(); }

  FieldTransform& transform() { return transform_; }
  const FieldTransform& transform() const { return transform_; }
  nn::Mlp& encoder() { return encoder_; }
  const nn::Mlp& encoder() const { return encoder_; }
  nn::Mlp& decoder() { return decoder_; }
  const nn::Mlp& decoder() const { return decoder_; }

 private:
  FieldTransform transform_;
  nn::Mlp encoder_;
  nn::Mlp decoder_;
};

// L_R = mean squared error between x_t and its reconstruction over all
// elements. x_t is the target as data: no gradient flows through the target
// side. When grad is non-null, scale * dL_R/dθ is accumulated into it.
double reconstruction_loss(const Autoencoder& ae, const Batch& batch, Rng* dropout_rng,
                           AutoencoderGrad* grad = nullptr, double scale = 1.0);

}  // namespace chadkit::model
