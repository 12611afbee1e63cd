#include "chadkit_cli/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "chadkit/errors.hpp"

namespace chadkit::cli {

namespace {

// Walks one JSON object, remembering which keys were consumed so that the
// rest can be reported as unknown.
class Reader {
 public:
  Reader(const json* j, std::string where, std::vector<std::string>& errors)
      : j_(j), where_(std::move(where)), errors_(errors) {
    if (j_ && !j_->is_object()) {
      errors_.push_back(where_ + ": expected an object");
      j_ = nullptr;
    }
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_ && j_->contains(key);
  }

  template <class T>
  void get(const char* key, T& out) {
    if (!has(key)) return;
    try {
      out = (*j_)[key].template get<T>();
    } catch (const json::exception&) {
      errors_.push_back(where_ + key + ": wrong type (" + std::string((*j_)[key].type_name()) + ")");
    }
  }

  const json* raw(const char* key) { return has(key) ? &(*j_)[key] : nullptr; }

  Reader child(const char* key) {
    return Reader(raw(key), where_ + key + ".", errors_);
  }

  void finish() {
    if (!j_) return;
    for (const auto& [k, _] : j_->items()) {
      if (!seen_.count(k)) errors_.push_back(where_ + k + ": unknown key");
    }
  }

  void error(const std::string& msg) { errors_.push_back(where_ + msg); }

 private:
  const json* j_;
  std::string where_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

const char* policy_name(data::UnseenPolicy p) {
  return p == data::UnseenPolicy::reject ? "reject" : "reserved";
}

}  // namespace

json RunConfig::to_json() const {
  json j;
  j["schema"] = schema;
  j["data"] = data;
  j["model_path"] = model_path;
  j["out"] = out;
  j["rare_min_count"] = rare_min_count ? json(*rare_min_count) : json(nullptr);
  j["unseen_policy"] = policy_name(unseen);
  j["clamp"] = clamp;
  j["seed"] = seed;
  j["architecture"] = {{"encoder_layers", architecture.encoder_layers},
                       {"embedding_dims", architecture.embedding_dims},
                       {"continuous_threshold", architecture.continuous_threshold},
                       {"continuous_dim", architecture.continuous_dim},
                       {"autoencoder_dropout", architecture.autoencoder_dropout},
                       {"estimator_dropout", architecture.estimator_dropout}};
  j["negatives"] = {{"per_record", schedule.negatives.negatives_per_record},
                    {"delta", schedule.negatives.delta},
                    {"dampening", schedule.negatives.dampening}};
  j["schedule"] = {{"phase1_epochs", schedule.phase1_epochs},
                   {"phase2_epochs", schedule.phase2_epochs},
                   {"phase3_epochs", schedule.phase3_epochs},
                   {"learning_rate", schedule.learning_rate},
                   {"batch_size", schedule.batch_size},
                   {"gamma_max", schedule.gamma_max},
                   {"secondary_noise", schedule.secondary_noise}};
  j["eval"] = {{"anomaly_fraction", eval.anomaly_fraction},
               {"vary_percentages", eval.vary_percentages},
               {"vary_repeats", eval.vary_repeats},
               {"noise_ablation", eval.noise_ablation},
               {"ablation_train_data", eval.ablation_train_data},
               {"ablation_seeds", eval.ablation_seeds}};
  j["viz"] = {{"layer", viz.layer}};
  j["negsample_dump"] = {{"records", dump.records}};
  const auto& g = synthetic.generator;
  j["synthetic"] = {{"rows", g.rows},
                    {"test_rows", synthetic.test_rows},
                    {"arities", g.arities},
                    {"continuous", g.continuous},
                    {"profiles", g.profiles},
                    {"continuous_sd", g.continuous_sd},
                    {"categorical_noise", g.categorical_noise}};
  j["concept"] = json::parse(concept_config.to_json());
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  std::vector<std::string> errors;
  Reader top(&j, "", errors);
  top.get("schema", c.schema);
  top.get("data", c.data);
  top.get("model_path", c.model_path);
  top.get("out", c.out);
  if (const json* v = top.raw("rare_min_count"); v && !v->is_null()) {
    if (v->is_number_unsigned() && v->get<std::uint64_t>() >= 1) {
      c.rare_min_count = v->get<std::size_t>();
    } else {
      top.error("rare_min_count: must be an integer >= 1");
    }
  }
  std::string policy = policy_name(c.unseen);
  top.get("unseen_policy", policy);
  if (policy == "reject") {
    c.unseen = data::UnseenPolicy::reject;
  } else if (policy == "reserved") {
    c.unseen = data::UnseenPolicy::reserved;
  } else {
    top.error("unseen_policy: must be \"reject\" or \"reserved\"");
  }
  top.get("clamp", c.clamp);
  top.get("seed", c.seed);

  auto arch = top.child("architecture");
  arch.get("encoder_layers", c.architecture.encoder_layers);
  arch.get("embedding_dims", c.architecture.embedding_dims);
  arch.get("continuous_threshold", c.architecture.continuous_threshold);
  arch.get("continuous_dim", c.architecture.continuous_dim);
  arch.get("autoencoder_dropout", c.architecture.autoencoder_dropout);
  arch.get("estimator_dropout", c.architecture.estimator_dropout);
  arch.finish();

  auto neg = top.child("negatives");
  neg.get("per_record", c.schedule.negatives.negatives_per_record);
  neg.get("delta", c.schedule.negatives.delta);
  neg.get("dampening", c.schedule.negatives.dampening);
  neg.finish();

  auto sch = top.child("schedule");
  sch.get("phase1_epochs", c.schedule.phase1_epochs);
  sch.get("phase2_epochs", c.schedule.phase2_epochs);
  sch.get("phase3_epochs", c.schedule.phase3_epochs);
  sch.get("learning_rate", c.schedule.learning_rate);
  sch.get("batch_size", c.schedule.batch_size);
  sch.get("gamma_max", c.schedule.gamma_max);
  sch.get("secondary_noise", c.schedule.secondary_noise);
  sch.finish();

  auto ev = top.child("eval");
  ev.get("anomaly_fraction", c.eval.anomaly_fraction);
  ev.get("vary_percentages", c.eval.vary_percentages);
  ev.get("vary_repeats", c.eval.vary_repeats);
  ev.get("noise_ablation", c.eval.noise_ablation);
  ev.get("ablation_train_data", c.eval.ablation_train_data);
  ev.get("ablation_seeds", c.eval.ablation_seeds);
  ev.finish();

  auto viz = top.child("viz");
  viz.get("layer", c.viz.layer);
  viz.finish();

  auto dump = top.child("negsample_dump");
  dump.get("records", c.dump.records);
  dump.finish();

  auto syn = top.child("synthetic");
  auto& g = c.synthetic.generator;
  syn.get("rows", g.rows);
  syn.get("test_rows", c.synthetic.test_rows);
  syn.get("arities", g.arities);
  syn.get("continuous", g.continuous);
  syn.get("profiles", g.profiles);
  syn.get("continuous_sd", g.continuous_sd);
  syn.get("categorical_noise", g.categorical_noise);
  syn.finish();

  if (const json* cc = top.raw("concept")) {
    try {
      c.concept_config = concept_bench::ConceptConfig::from_json(cc->dump());
    } catch (const ConfigError& e) {
      errors.push_back(std::string("concept.") + e.what());
    }
  }
  top.finish();

  // Value checks.
  auto check = [&](auto&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      errors.push_back(e.what());
    }
  };
  check([&] { c.schedule.validate(); });
  check([&] { c.synthetic.generator.validate(); });
  if (c.architecture.encoder_layers.empty()) errors.push_back("architecture.encoder_layers: must not be empty");
  for (int s : c.architecture.encoder_layers) {
    if (s < 1) errors.push_back("architecture.encoder_layers: sizes must be >= 1");
  }
  for (double d : {c.architecture.autoencoder_dropout, c.architecture.estimator_dropout}) {
    if (d < 0.0 || d >= 1.0) errors.push_back("architecture: dropout rates must lie in [0,1)");
  }
  if (!(c.schedule.negatives.dampening > 0.0)) errors.push_back("negatives.dampening: must be > 0");
  if (!(c.eval.anomaly_fraction >= 0.0 && c.eval.anomaly_fraction <= 1.0)) {
    errors.push_back("eval.anomaly_fraction: must lie in [0,1]");
  }
  if (c.eval.vary_repeats < 1) errors.push_back("eval.vary_repeats: must be >= 1");
  for (double p : c.eval.vary_percentages) {
    if (!(p > 0.0 && p < 100.0)) errors.push_back("eval.vary_percentages: values must lie in (0,100)");
  }
  if (c.viz.layer != "latent" && c.viz.layer != "penultimate") {
    errors.push_back("viz.layer: must be \"latent\" or \"penultimate\"");
  }

  if (!errors.empty()) {
    std::ostringstream os;
    os << "invalid configuration (" << errors.size() << " problem" << (errors.size() == 1 ? "" : "s")
       << "):";
    for (const auto& e : errors) os << "\n  - " << e;
    throw ConfigError(os.str());
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(j);
}

json seeds_json(std::uint64_t root) {
  const auto s = SeedStreams::from_root(root);
  return {{"root", root},       {"init", s.init},   {"shuffle", s.shuffle},
          {"negsampler", s.negsampler}, {"noise", s.noise}, {"dropout", s.dropout},
          {"bench", s.bench},   {"eval", s.eval}};
}

}  // namespace chadkit::cli
