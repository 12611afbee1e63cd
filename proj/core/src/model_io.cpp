#include "chadkit/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "chadkit/errors.hpp"
#include "chadkit/rng.hpp"
#include <nlohmann/json.hpp>

namespace chadkit::model {

using ordered_json = nlohmann::ordered_json;

ChadModel ChadModel::create(const data::RecordSchema& schema,
                            std::vector<data::Vocabulary> vocabularies,
                            data::NormalizationStats normalization, const ModelConfig& config,
                            std::uint64_t init_seed) {
  if (vocabularies.size() != schema.categorical_count()) {
    throw SchemaError("one vocabulary per categorical field is required");
  }
  ChadModel m;
  m.schema = schema;
  m.vocabularies = std::move(vocabularies);
  m.normalization = std::move(normalization);
  m.config = config;
  const auto arities = m.arities();
  auto spec = make_transform_spec(arities, static_cast<int>(schema.continuous_count()),
                                  config.continuous_threshold, config.continuous_dim,
                                  config.embedding_dims);
  m.autoencoder = Autoencoder(std::move(spec), arities, config.encoder_layers,
                              config.autoencoder_dropout);
  m.estimator = Estimator(m.autoencoder.latent_dim(), config.estimator_dropout);
  Rng rng(init_seed);
  m.autoencoder.init(rng);
  m.estimator.init(rng);
  return m;
}

std::vector<int> ChadModel::arities() const {
  std::vector<int> out;
  for (const auto& v : vocabularies) out.push_back(static_cast<int>(v.size()));
  return out;
}

std::uint64_t ChadModel::schema_hash() const { return model::schema_hash(schema, arities()); }

Matrix ChadModel::latents(const Batch& batch) const { return autoencoder.latents(batch); }

Eigen::RowVectorXd ChadModel::score(const Batch& batch) const {
  return estimator.likelihood(autoencoder.latents(batch));
}

std::uint64_t schema_hash(const data::RecordSchema& schema, const std::vector<int>& arities) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  for (const auto& c : schema.columns()) {
    if (c.kind == data::FieldKind::ignore || c.kind == data::FieldKind::label) continue;
    feed(c.name);
    feed(data::to_string(c.kind));
  }
  for (int a : arities) feed(std::to_string(a));
  return h;
}

namespace {

constexpr char kMagic[8] = {'C', 'H', 'A', 'D', 'K', 'I', 'T', '\0'};

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
  }
}

template <typename T>
T get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw ModelMismatchError("model file truncated");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  pos += sizeof(T);
  return static_cast<T>(v);
}

void put_f64(std::string& out, double d) { put_le(out, std::bit_cast<std::uint64_t>(d)); }

double get_f64(const std::string& in, std::size_t& pos) {
  return std::bit_cast<double>(get_le<std::uint64_t>(in, pos));
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

ordered_json mlp_json(const nn::Mlp& mlp) {
  ordered_json layers = ordered_json::array();
  for (const auto& l : mlp.layers()) {
    layers.push_back({{"in", l.in_dim()}, {"out", l.out_dim()},
                      {"activation", nn::to_string(l.activation)}});
  }
  return {{"dropout", mlp.dropout_rate()}, {"layers", layers}};
}

// Parameter tensors in payload order: embeddings, continuous transform,
// encoder, decoder, estimator; within a dense layer weights (column-major)
// then bias.
nn::ParamList payload_tensors(ChadModel& m) {
  nn::ParamList out = m.autoencoder.params();
  for (auto p : m.estimator.mlp().params()) out.push_back(p);
  return out;
}

nn::ConstParamList payload_tensors(const ChadModel& m) {
  nn::ConstParamList out = m.autoencoder.params();
  for (auto p : m.estimator.mlp().params()) out.push_back(p);
  return out;
}

}  // namespace

std::string serialize_model(const ChadModel& m) {
  ordered_json h;
  h["format"] = "chadkit-model";
  h["version"] = kModelFormatVersion;
  h["schema_hash"] = hex64(m.schema_hash());
  h["schema"] = ordered_json::parse(m.schema.to_json());
  ordered_json vocab = ordered_json::object();
  for (std::size_t w = 0; w < m.vocabularies.size(); ++w) {
    vocab[m.schema.categorical_names()[w]] = m.vocabularies[w].values();
  }
  h["vocabularies"] = vocab;
  h["normalization"] = {{"fields", m.normalization.names},
                        {"min", m.normalization.min},
                        {"max", m.normalization.max}};
  const auto& c = m.config;
  h["config"] = {{"encoder_layers", c.encoder_layers},
                 {"embedding_dims", c.embedding_dims},
                 {"continuous_threshold", c.continuous_threshold},
                 {"continuous_dim", c.continuous_dim},
                 {"autoencoder_dropout", c.autoencoder_dropout},
                 {"estimator_dropout", c.estimator_dropout}};
  const auto& spec = m.autoencoder.transform().spec();
  h["transform"] = {{"embedding_dims", spec.embedding_dims},
                    {"continuous_count", spec.continuous_count},
                    {"continuous_mode",
                     spec.continuous_mode == ContinuousMode::linear ? "linear" : "identity"},
                    {"continuous_dim", spec.continuous_dim},
                    {"transformed_dim", spec.transformed_dim()}};
  h["latent_dim"] = m.autoencoder.latent_dim();
  h["encoder"] = mlp_json(m.autoencoder.encoder());
  h["decoder"] = mlp_json(m.autoencoder.decoder());
  h["estimator"] = mlp_json(m.estimator.mlp());
  ordered_json sizes = ordered_json::array();
  std::uint64_t count = 0;
  const auto tensors = payload_tensors(m);
  for (const auto& t : tensors) {
    sizes.push_back(t.size());
    count += t.size();
  }
  h["tensor_sizes"] = sizes;

  const std::string header = h.dump();
  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kModelFormatVersion);
  put_le<std::uint64_t>(out, header.size());
  out += header;
  put_le<std::uint64_t>(out, count);
  out.reserve(out.size() + count * 8);
  for (const auto& t : tensors) {
    for (double d : t) put_f64(out, d);
  }
  return out;
}

ChadModel deserialize_model(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ModelMismatchError("not a chadkit model file (bad magic)");
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kModelFormatVersion) {
    throw ModelMismatchError("unsupported model format version " + std::to_string(version));
  }
  const auto header_len = get_le<std::uint64_t>(bytes, pos);
  if (pos + header_len > bytes.size()) throw ModelMismatchError("model file truncated");
  ordered_json h;
  try {
    h = ordered_json::parse(bytes.substr(pos, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ModelMismatchError(std::string("corrupt model header: ") + e.what());
  }
  pos += header_len;

  try {
    auto schema = data::RecordSchema::from_json(h.at("schema").dump());
    std::vector<data::Vocabulary> vocabs;
    for (const auto& name : schema.categorical_names()) {
      data::Vocabulary v;
      for (const auto& s : h.at("vocabularies").at(name)) v.add(s.get<std::string>());
      vocabs.push_back(std::move(v));
    }
    data::NormalizationStats norm;
    norm.names = h.at("normalization").at("fields").get<std::vector<std::string>>();
    norm.min = h.at("normalization").at("min").get<std::vector<double>>();
    norm.max = h.at("normalization").at("max").get<std::vector<double>>();
    ModelConfig cfg;
    const auto& c = h.at("config");
    cfg.encoder_layers = c.at("encoder_layers").get<std::vector<int>>();
    cfg.embedding_dims = c.at("embedding_dims").get<std::vector<int>>();
    cfg.continuous_threshold = c.at("continuous_threshold").get<int>();
    cfg.continuous_dim = c.at("continuous_dim").get<int>();
    cfg.autoencoder_dropout = c.at("autoencoder_dropout").get<double>();
    cfg.estimator_dropout = c.at("estimator_dropout").get<double>();

    ChadModel m = ChadModel::create(schema, std::move(vocabs), std::move(norm), cfg, 0);
    if (hex64(m.schema_hash()) != h.at("schema_hash").get<std::string>()) {
      throw ModelMismatchError("model header schema hash does not match its schema");
    }
    const auto sizes = h.at("tensor_sizes").get<std::vector<std::size_t>>();
    auto tensors = payload_tensors(m);
    if (sizes.size() != tensors.size()) {
      throw ModelMismatchError("model tensor count does not match its architecture");
    }
    const auto count = get_le<std::uint64_t>(bytes, pos);
    std::uint64_t expected = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      if (sizes[i] != tensors[i].size()) {
        throw ModelMismatchError("model tensor " + std::to_string(i) + " has the wrong size");
      }
      expected += sizes[i];
    }
    if (count != expected || pos + count * 8 != bytes.size()) {
      throw ModelMismatchError("model payload size mismatch");
    }
    for (auto& t : tensors) {
      for (double& d : t) d = get_f64(bytes, pos);
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ModelMismatchError(std::string("incomplete model header: ") + e.what());
  }
}

void save_model(const ChadModel& model, const std::string& path) {
  const std::string bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write model file '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("failed writing model file '" + path + "'");
}

ChadModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace chadkit::model
