#include "chadkit/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "chadkit/errors.hpp"

namespace chadkit::model {

int FieldTransformSpec::transformed_dim() const {
  int d = continuous_output_dim();
  for (int e : embedding_dims) d += e;
  return d;
}

int default_embedding_dim(int arity) {
  const int root = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(std::max(arity, 1)))));
  return std::min(root + 1, 32);
}

FieldTransformSpec make_transform_spec(const std::vector<int>& arities, int continuous_count,
                                       int threshold, int linear_dim,
                                       std::vector<int> embedding_dims) {
  FieldTransformSpec spec;
  if (embedding_dims.empty()) {
    for (int a : arities) spec.embedding_dims.push_back(default_embedding_dim(a));
  } else {
    if (embedding_dims.size() != arities.size()) {
      throw ConfigError("embedding_dims must list one size per categorical field");
    }
    spec.embedding_dims = std::move(embedding_dims);
  }
  for (int e : spec.embedding_dims) {
    if (e < 1) throw ConfigError("embedding dimensions must be >= 1");
  }
  spec.continuous_count = continuous_count;
  if (continuous_count > threshold) {
    if (linear_dim < 1) throw ConfigError("continuous linear dimension must be >= 1");
    spec.continuous_mode = ContinuousMode::linear;
    spec.continuous_dim = linear_dim;
  }
  return spec;
}

Batch make_batch(std::span<const data::Record> records) {
  Batch b;
  const auto n = static_cast<Eigen::Index>(records.size());
  const auto k = records.empty() ? 0 : static_cast<Eigen::Index>(records[0].categories.size());
  const auto r = records.empty() ? 0 : static_cast<Eigen::Index>(records[0].continuous.size());
  b.categories.resize(k, n);
  b.continuous.resize(r, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto& rec = records[static_cast<std::size_t>(c)];
    for (Eigen::Index w = 0; w < k; ++w) b.categories(w, c) = rec.categories[static_cast<std::size_t>(w)];
    for (Eigen::Index j = 0; j < r; ++j) b.continuous(j, c) = rec.continuous[static_cast<std::size_t>(j)];
  }
  return b;
}

Batch make_batch(std::span<const data::Record> records, std::span<const std::size_t> indices) {
  std::vector<data::Record> picked;
  picked.reserve(indices.size());
  for (auto i : indices) picked.push_back(records[i]);
  return make_batch(picked);
}

void FieldTransformGrad::zero() {
  for (auto& e : embeddings) e.setZero();
  if (continuous) continuous->zero();
}

FieldTransform::FieldTransform(FieldTransformSpec spec, std::vector<int> arities)
    : spec_(std::move(spec)), arities_(std::move(arities)) {
  if (arities_.size() != spec_.embedding_dims.size()) {
    throw SchemaError("field transform: arity count does not match embedding count");
  }
  for (std::size_t w = 0; w < arities_.size(); ++w) {
    if (arities_[w] < 1) throw SchemaError("categorical arity must be >= 1");
    embeddings_.push_back(Matrix::Zero(spec_.embedding_dims[w], arities_[w]));
  }
  if (spec_.continuous_mode == ContinuousMode::linear) {
    continuous_.emplace(spec_.continuous_count, spec_.continuous_dim, nn::Activation::identity);
  }
}

void FieldTransform::init(Rng& rng) {
  for (auto& e : embeddings_) nn::glorot_uniform(e, rng);
  if (continuous_) {
    nn::glorot_uniform(continuous_->weights, rng);
    continuous_->bias.setZero();
  }
}

void FieldTransform::check(const Batch& batch) const {
  if (batch.categories.rows() != static_cast<Eigen::Index>(arities_.size()) ||
      batch.continuous.rows() != spec_.continuous_count) {
    std::ostringstream os;
    os << "batch has " << batch.categories.rows() << " categorical / "
       << batch.continuous.rows() << " continuous rows, transform expects "
       << arities_.size() << " / " << spec_.continuous_count;
    throw SchemaError(os.str());
  }
  for (Eigen::Index w = 0; w < batch.categories.rows(); ++w) {
    for (Eigen::Index c = 0; c < batch.categories.cols(); ++c) {
      const int idx = batch.categories(w, c);
      if (idx < 0 || idx >= arities_[static_cast<std::size_t>(w)]) {
        std::ostringstream os;
        os << "category index " << idx << " out of range for field " << w << " (arity "
           << arities_[static_cast<std::size_t>(w)] << ")";
        throw SchemaError(os.str());
      }
    }
  }
}

Matrix FieldTransform::forward(const Batch& batch) const {
  check(batch);
  const Eigen::Index n = batch.size();
  Matrix xt(spec_.transformed_dim(), n);
  Eigen::Index row = 0;
  for (std::size_t w = 0; w < embeddings_.size(); ++w) {
    const auto& table = embeddings_[w];
    for (Eigen::Index c = 0; c < n; ++c) {
      xt.block(row, c, table.rows(), 1) = table.col(batch.categories(static_cast<Eigen::Index>(w), c));
    }
    row += table.rows();
  }
  if (continuous_) {
    xt.bottomRows(spec_.continuous_dim) = continuous_->forward(batch.continuous);
  } else if (spec_.continuous_count > 0) {
    xt.bottomRows(spec_.continuous_count) = batch.continuous;
  }
  return xt;
}

Vector FieldTransform::forward(const data::Record& record) const {
  const data::Record one[] = {record};
  return forward(make_batch(one)).col(0);
}

void FieldTransform::backward(const Batch& batch, const Matrix& d_xt,
                              FieldTransformGrad& grad) const {
  Eigen::Index row = 0;
  for (std::size_t w = 0; w < embeddings_.size(); ++w) {
    const Eigen::Index e = embeddings_[w].rows();
    for (Eigen::Index c = 0; c < d_xt.cols(); ++c) {
      grad.embeddings[w].col(batch.categories(static_cast<Eigen::Index>(w), c)) +=
          d_xt.block(row, c, e, 1);
    }
    row += e;
  }
  if (continuous_) {
    const Matrix out = continuous_->forward(batch.continuous);
    continuous_->backward(batch.continuous, out, d_xt.bottomRows(spec_.continuous_dim),
                          *grad.continuous);
  }
}

FieldTransformGrad FieldTransform::make_grad() const {
  FieldTransformGrad g;
  for (const auto& e : embeddings_) g.embeddings.push_back(Matrix::Zero(e.rows(), e.cols()));
  if (continuous_) g.continuous = continuous_->make_grad();
  return g;
}

nn::ParamList FieldTransform::params() {
  nn::ParamList out;
  for (auto& e : embeddings_) out.push_back(nn::as_span(e));
  if (continuous_) {
    out.push_back(nn::as_span(continuous_->weights));
    out.push_back(nn::as_span(continuous_->bias));
  }
  return out;
}

nn::ConstParamList FieldTransform::params() const {
  nn::ConstParamList out;
  for (const auto& e : embeddings_) out.push_back(nn::as_const_span(e));
  if (continuous_) {
    out.push_back(nn::as_const_span(continuous_->weights));
    out.push_back(nn::as_const_span(continuous_->bias));
  }
  return out;
}

void AutoencoderGrad::zero() {
  transform.zero();
  encoder.zero();
  decoder.zero();
}

nn::ParamList AutoencoderGrad::params() {
  nn::ParamList out;
  for (auto& e : transform.embeddings) out.push_back(nn::as_span(e));
  if (transform.continuous) {
    out.push_back(nn::as_span(transform.continuous->weights));
    out.push_back(nn::as_span(transform.continuous->bias));
  }
  for (auto p : encoder.params()) out.push_back(p);
  for (auto p : decoder.params()) out.push_back(p);
  return out;
}

nn::ConstParamList AutoencoderGrad::params() const {
  nn::ConstParamList out;
  for (const auto& e : transform.embeddings) out.push_back(nn::as_const_span(e));
  if (transform.continuous) {
    out.push_back(nn::as_const_span(transform.continuous->weights));
    out.push_back(nn::as_const_span(transform.continuous->bias));
  }
  for (auto p : encoder.params()) out.push_back(p);
  for (auto p : decoder.params()) out.push_back(p);
  return out;
}

namespace {

std::vector<int> decoder_sizes(const std::vector<int>& encoder_layers, int output_dim) {
  // Hidden sizes mirror the encoder (minus the latent layer) in reverse.
  std::vector<int> sizes(encoder_layers.rbegin() + 1, encoder_layers.rend());
  sizes.push_back(output_dim);
  return sizes;
}

}  // namespace

Autoencoder::Autoencoder(FieldTransformSpec spec, std::vector<int> arities,
                         const std::vector<int>& encoder_layers, double dropout)
    : transform_(std::move(spec), std::move(arities)) {
  if (encoder_layers.empty()) throw ConfigError("encoder needs at least one layer");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout rate must lie in [0,1)");
  const int d = transform_.spec().transformed_dim();
  if (d < 1) throw ConfigError("transformed input dimension must be >= 1");
  encoder_ = nn::Mlp(d, encoder_layers, nn::Activation::tanh, nn::Activation::tanh, dropout);
  decoder_ = nn::Mlp(encoder_layers.back(), decoder_sizes(encoder_layers, d),
                     nn::Activation::tanh, nn::Activation::sigmoid, dropout);
}

void Autoencoder::init(Rng& rng) {
  transform_.init(rng);
  encoder_.init(rng);
  decoder_.init(rng);
}

Autoencoder::Pass Autoencoder::forward(const Batch& batch, Rng* dropout_rng, bool decode) const {
  Pass p;
  p.transformed = transform_.forward(batch);
  p.latent = encoder_.forward(p.transformed, &p.encoder_tape, dropout_rng);
  if (decode) p.reconstruction = decoder_.forward(p.latent, &p.decoder_tape, dropout_rng);
  return p;
}

Matrix Autoencoder::encode(const Matrix& transformed) const { return encoder_.forward(transformed); }

Matrix Autoencoder::decode(const Matrix& latent) const { return decoder_.forward(latent); }

Matrix Autoencoder::latents(const Batch& batch) const {
  return encoder_.forward(transform_.forward(batch));
}

Matrix Autoencoder::backward_decoder(const Pass& pass, const Matrix& d_reconstruction,
                                     AutoencoderGrad& grad) const {
  return decoder_.backward(pass.decoder_tape, d_reconstruction, grad.decoder);
}

void Autoencoder::backward_encoder(const Batch& batch, const Pass& pass, const Matrix& d_latent,
                                   AutoencoderGrad& grad) const {
  const Matrix d_xt = encoder_.backward(pass.encoder_tape, d_latent, grad.encoder);
  transform_.backward(batch, d_xt, grad.transform);
}

AutoencoderGrad Autoencoder::make_grad() const {
  return {transform_.make_grad(), encoder_.make_grad(), decoder_.make_grad()};
}

nn::ParamList Autoencoder::params() {
  nn::ParamList out = transform_.params();
  for (auto p : encoder_.params()) out.push_back(p);
  for (auto p : decoder_.params()) out.push_back(p);
  return out;
}

nn::ConstParamList Autoencoder::params() const {
  nn::ConstParamList out = transform_.params();
  for (auto p : encoder_.params()) out.push_back(p);
  for (auto p : decoder_.params()) out.push_back(p);
  return out;
}

nn::ConstParamList Autoencoder::encoder_params() const {
  nn::ConstParamList out = transform_.params();
  for (auto p : encoder_.params()) out.push_back(p);
  return out;
}

double reconstruction_loss(const Autoencoder& ae, const Batch& batch, Rng* dropout_rng,
                           AutoencoderGrad* grad, double scale) {
  const auto pass = ae.forward(batch, dropout_rng, true);
  const auto loss = nn::mse_loss(pass.transformed, pass.reconstruction);
  if (grad) {
    const Matrix d_latent = ae.backward_decoder(pass, scale * loss.grad, *grad);
    ae.backward_encoder(batch, pass, d_latent, *grad);
  }
  return loss.value;
}

}  // namespace chadkit::model
