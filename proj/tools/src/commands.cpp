#include "chadkit_cli/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "chadkit/csv.hpp"
#include "chadkit/errors.hpp"
#include "chadkit/eval.hpp"
#include "chadkit/negsampler.hpp"
#include "chadkit_cli/run_config.hpp"

namespace chadkit::cli {

namespace fs = std::filesystem;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ModelMismatchError*>(&e) || dynamic_cast<const SchemaError*>(&e)) {
    return kExitMismatch;
  }
  if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
  return kExitConfig;
}

namespace {

struct Overrides {
  std::string config;
  std::string out;
  std::string model;
  std::string data;
  std::optional<std::uint64_t> seed;
};

RunConfig resolve(const Overrides& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : RunConfig::load(o.config);
  if (o.seed) c.seed = *o.seed;
  if (!o.out.empty()) c.out = o.out;
  if (!o.model.empty()) c.model_path = o.model;
  if (!o.data.empty()) c.data = o.data;
  return c;
}

// Collects missing settings and paths so they are reported together.
class Requirements {
 public:
  void value(bool present, const std::string& what) {
    if (!present) errors_.push_back(what + " is required");
  }
  void file(const std::string& path, const std::string& what) {
    if (path.empty()) {
      errors_.push_back(what + " is required");
    } else if (!fs::is_regular_file(path)) {
      errors_.push_back(what + " '" + path + "' does not exist");
    }
  }
  void check() const {
    if (errors_.empty()) return;
    std::ostringstream os;
    os << "invalid configuration:";
    for (const auto& e : errors_) os << "\n  - " << e;
    throw ConfigError(os.str());
  }

 private:
  std::vector<std::string> errors_;
};

fs::path prepare_out(const RunConfig& c) {
  const fs::path dir(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ConfigError("cannot create output directory '" + c.out + "'");
  }
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

json report_base(const RunConfig& c, const char* command) {
  json j;
  j["command"] = command;
  j["config"] = c.to_json();
  j["seeds"] = seeds_json(c.seed);
  return j;
}

void write_resolved_config(const fs::path& dir, const RunConfig& c) {
  write_file(dir / "resolved_config.json", c.to_json().dump(2) + "\n");
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

json vocabularies_json(const data::RecordSchema& schema, const std::vector<data::Vocabulary>& v) {
  json j = json::object();
  for (std::size_t w = 0; w < v.size(); ++w) j[schema.categorical_names()[w]] = v[w].values();
  return j;
}

json normalization_json(const data::NormalizationStats& s) {
  json j = json::object();
  for (std::size_t i = 0; i < s.names.size(); ++i) {
    j[s.names[i]] = {{"min", s.min[i]}, {"max", s.max[i]}};
  }
  return j;
}

// Fails with a model mismatch when the file lacks a column the model reads.
void check_header(const model::ChadModel& m, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open data file '" + path + "'");
  csv::Reader reader(in);
  csv::Row header;
  if (!reader.next(header)) throw DataError("data file '" + path + "' is empty");
  std::vector<std::string> missing;
  for (const auto& f : m.schema.columns()) {
    if (f.kind != data::FieldKind::categorical && f.kind != data::FieldKind::continuous) continue;
    if (std::find(header.begin(), header.end(), f.name) == header.end()) missing.push_back(f.name);
  }
  if (!missing.empty()) {
    std::string msg = "data file '" + path + "' does not match the model schema; missing:";
    for (const auto& n : missing) msg += " " + n;
    throw ModelMismatchError(msg);
  }
}

// Loads data against a trained model: frozen vocabularies, model
// normalization, unseen-category policy from the config.
data::Dataset load_for_model(const model::ChadModel& m, const RunConfig& c,
                             data::LoadReport* report) {
  check_header(m, c.data);
  if (!c.schema.empty()) {
    const auto given = data::RecordSchema::load(c.schema);
    if (model::schema_hash(given, m.arities()) != m.schema_hash()) {
      throw ModelMismatchError("schema '" + c.schema + "' does not match the model's schema hash");
    }
  }
  data::LoadOptions lo;
  lo.frozen_vocabularies = &m.vocabularies;
  lo.unseen = c.unseen;
  const auto raw = data::load_csv(c.data, m.schema, lo, report);
  if (raw.records.empty()) throw DataError("no usable rows in '" + c.data + "'");
  return data::apply_normalize(m.normalization, raw, c.clamp);
}

model::ChadModel load_model_checked(const RunConfig& c) {
  Requirements req;
  req.file(c.model_path, "model (--model)");
  req.file(c.data, "data (--data)");
  req.check();
  return model::load_model(c.model_path);
}

// ---- train ----

int cmd_train(const RunConfig& c, std::ostream& out) {
  Requirements req;
  req.file(c.schema, "schema");
  req.file(c.data, "training data (--data)");
  req.value(c.rare_min_count.has_value(), "rare_min_count");
  req.check();

  const auto schema = data::RecordSchema::load(c.schema);
  data::LoadOptions lo;
  lo.reserve_unknown = c.unseen == data::UnseenPolicy::reserved;
  data::LoadReport load_report;
  const auto raw = data::load_csv(c.data, schema, lo, &load_report);
  const auto filtered = data::filter_rare_entities(raw, *c.rare_min_count);
  if (filtered.records.empty()) {
    throw ConfigError("no training rows left after rare-entity filtering (min_count " +
                      std::to_string(*c.rare_min_count) + ")");
  }
  std::vector<std::string> warnings;
  for (std::size_t w = 0; w < filtered.vocabularies.size(); ++w) {
    if (filtered.vocabularies[w].size() < 2) {
      warnings.push_back("categorical field '" + schema.categorical_names()[w] +
                         "' has fewer than two values after filtering");
    }
  }
  const auto stats = data::fit_normalize(filtered, &warnings);
  const auto train_set = data::apply_normalize(stats, filtered);

  const auto dir = prepare_out(c);
  write_resolved_config(dir, c);
  const auto streams = SeedStreams::from_root(c.seed);
  auto m = model::ChadModel::create(schema, filtered.vocabularies, stats, c.architecture, streams.init);

  std::ofstream log(dir / "train_log.jsonl", std::ios::binary);
  if (!log) throw ConfigError("cannot write training log in '" + c.out + "'");
  std::vector<std::string> files;
  json last_losses = json::object();
  train::Trainer trainer(m, train_set, c.schedule, streams);
  trainer.on_batch = [&](const train::TrainLogEntry& e) {
    log << e.to_json() << '\n';
    if (e.reconstruction_loss) last_losses["L_R"] = *e.reconstruction_loss;
    if (e.estimator_loss) last_losses["L_est"] = *e.estimator_loss;
  };
  trainer.on_phase_end = [&](int phase, const model::ChadModel& snapshot) {
    const auto name = "checkpoint_phase" + std::to_string(phase) + ".chad";
    model::save_model(snapshot, (dir / name).string());
    files.push_back(name);
    out << "phase " << phase << " done\n";
  };
  trainer.run();
  log.flush();
  model::save_model(m, (dir / "model.chad").string());
  files.push_back("model.chad");

  json lr = json::parse(load_report.to_json());
  lr["rows_after_rare_filter"] = filtered.size();
  lr["rare_min_count"] = *c.rare_min_count;
  lr["arities_after_rare_filter"] = filtered.arities();
  write_file(dir / "load_report.json", lr.dump(2) + "\n");
  write_file(dir / "vocabularies.json", vocabularies_json(schema, filtered.vocabularies).dump(2) + "\n");
  write_file(dir / "normalization.json", normalization_json(stats).dump(2) + "\n");

  auto report = report_base(c, "train");
  report["rows"] = train_set.size();
  report["arities"] = m.arities();
  report["latent_dim"] = m.autoencoder.latent_dim();
  report["final_losses"] = last_losses;
  report["warnings"] = warnings;
  report["files"] = files;
  write_file(dir / "train_report.json", report.dump(2) + "\n");
  for (const auto& w : warnings) out << "warning: " << w << '\n';
  out << "trained on " << train_set.size() << " rows; model written to "
      << (dir / "model.chad").string() << '\n';
  return kExitOk;
}

// ---- score ----

int cmd_score(const RunConfig& c, std::ostream& out) {
  const auto m = load_model_checked(c);
  data::LoadReport rep;
  const auto ds = load_for_model(m, c, &rep);
  auto scored = eval::score_dataset(m, ds);
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.score < b.score || (a.score == b.score && a.id < b.id);
  });
  const auto dir = prepare_out(c);
  write_resolved_config(dir, c);
  std::ostringstream csv;
  csv << "record_id,score\n";
  for (const auto& s : scored) csv << s.id << ',' << fmt(s.score) << '\n';
  write_file(dir / "scores.csv", csv.str());

  auto report = report_base(c, "score");
  report["rows_scored"] = scored.size();
  report["load_report"] = json::parse(rep.to_json());
  report["rejected_rows"] = rep.unseen_row_ids;
  write_file(dir / "score_report.json", report.dump(2) + "\n");
  out << "scored " << scored.size() << " rows";
  if (rep.dropped_unseen + rep.dropped_missing > 0) {
    out << " (" << rep.dropped_unseen << " rejected for unseen categories, " << rep.dropped_missing
        << " with missing cells)";
  }
  out << "\n";
  return kExitOk;
}

// ---- eval ----

bool has_both_classes(const data::Dataset& ds) {
  bool nominal = false, anomaly = false;
  for (const auto& r : ds.records) {
    if (r.label && *r.label == data::Label::anomaly) {
      anomaly = true;
    } else {
      nominal = true;
    }
  }
  return nominal && anomaly;
}

int cmd_eval(const RunConfig& c, std::ostream& out) {
  if (c.eval.noise_ablation) {
    Requirements req;
    req.file(c.eval.ablation_train_data, "eval.ablation_train_data");
    req.check();
  }
  const auto m = load_model_checked(c);
  data::LoadReport rep;
  const auto test = load_for_model(m, c, &rep);
  const auto streams = SeedStreams::from_root(c.seed);

  // Nominal part and anomaly source: labeled anomalies when the file has
  // them, otherwise trade-style synthetic anomalies.
  std::vector<data::Record> nominal_rows, anomaly_rows;
  for (const auto& r : test.records) {
    (r.label && *r.label == data::Label::anomaly ? anomaly_rows : nominal_rows).push_back(r);
  }
  const auto nominal = test.with_records(nominal_rows);
  const bool labeled = has_both_classes(test);
  data::Dataset mixed;
  if (labeled) {
    mixed = test;
  } else {
    Rng rng(derive_seed(streams.eval, "eval/synthetic"));
    mixed = eval::synth_anomalies(nominal, c.eval.anomaly_fraction, rng);
  }
  const auto scored = eval::score_dataset(m, mixed);
  const double ap = eval::average_precision(scored);
  std::size_t n_anom = 0;
  for (const auto& s : scored) n_anom += s.label && *s.label == data::Label::anomaly;

  const auto dir = prepare_out(c);
  write_resolved_config(dir, c);
  std::ostringstream csv;
  csv << "record_id,score,label\n";
  for (const auto& s : scored) {
    csv << s.id << ',' << fmt(s.score) << ','
        << (s.label && *s.label == data::Label::anomaly ? "anomaly" : "nominal") << '\n';
  }
  write_file(dir / "eval_scores.csv", csv.str());

  auto report = report_base(c, "eval");
  report["anomaly_source"] = labeled ? "labels" : "synthetic";
  report["rows"] = scored.size();
  report["anomalies"] = n_anom;
  report["average_precision"] = ap;
  report["load_report"] = json::parse(rep.to_json());

  if (!c.eval.vary_percentages.empty()) {
    data::Dataset pool;
    if (labeled) {
      pool = test.with_records(anomaly_rows);
    } else {
      Rng rng(derive_seed(streams.eval, "eval/pool"));
      const auto all = eval::synth_anomalies(nominal, 1.0, rng);
      pool = all.with_records(
          std::vector<data::Record>(all.records.begin() + static_cast<std::ptrdiff_t>(nominal.size()),
                                    all.records.end()));
    }
    const auto rows = eval::vary_anomaly_harness(m, nominal, pool, c.eval.vary_percentages,
                                                 static_cast<std::size_t>(c.eval.vary_repeats),
                                                 derive_seed(streams.eval, "eval/vary"));
    write_file(dir / "vary_anomaly.csv", eval::vary_anomaly_csv(rows));
    json vr = json::array();
    for (const auto& r : rows) {
      vr.push_back({{"percentage", r.percentage},
                    {"anomalies", r.anomaly_count},
                    {"mean_ap", r.mean},
                    {"sd_ap", r.sd},
                    {"per_seed", r.per_seed}});
    }
    bool increasing = rows.size() < 2 || rows.back().mean >= rows.front().mean;
    report["vary_anomaly"] = {{"rows", vr}, {"trend_last_ge_first", increasing}};
  }

  if (c.eval.noise_ablation) {
    data::LoadOptions lo;
    lo.frozen_vocabularies = &m.vocabularies;
    lo.unseen = c.unseen;
    const auto train_raw = data::load_csv(c.eval.ablation_train_data, m.schema, lo);
    const auto train_set = data::apply_normalize(m.normalization, train_raw);
    auto seeds = c.eval.ablation_seeds;
    if (seeds.empty()) seeds.push_back(c.seed);
    const auto ablation = eval::noise_ablation(train_set, mixed, m.config, c.schedule, seeds);
    write_file(dir / "noise_ablation.json", ablation.to_json() + "\n");
    report["noise_ablation"] = json::parse(ablation.to_json());
  }
  write_file(dir / "eval_report.json", report.dump(2) + "\n");
  out << "average precision " << fmt(ap) << " on " << scored.size() << " rows (" << n_anom
      << " anomalies)\n";
  return kExitOk;
}

// ---- bench-concept ----

int cmd_bench_concept(const RunConfig& c, std::ostream& out, bool seed_given) {
  auto cc = c.concept_config;
  if (seed_given) cc.seed = c.seed;
  cc.validate();
  const auto res = concept_bench::run_concept_bench(cc);
  const auto dir = prepare_out(c);
  write_resolved_config(dir, c);
  write_file(dir / "concept_ap.csv", res.per_seed_csv());
  write_file(dir / "concept_summary.csv", res.summary_csv());

  // Data dump of the first seed's training and held-out sets for plotting.
  {
    const std::uint64_t s0 = res.runs.front().seed;
    Rng train_rng(derive_seed(s0, "concept/train"));
    Rng test_rng(derive_seed(s0, "concept/test"));
    std::ostringstream tr, te;
    concept_bench::write_points_csv(tr, concept_bench::gen_concept_data(cc, train_rng));
    concept_bench::write_points_csv(te, concept_bench::gen_concept_data(cc, test_rng));
    write_file(dir / "concept_train_points.csv", tr.str());
    write_file(dir / "concept_test_points.csv", te.str());
  }

  auto report = report_base(c, "bench-concept");
  report["concept_seed"] = cc.seed;
  json rows = json::array();
  for (const auto& r : res.rows) {
    rows.push_back({{"method", r.method}, {"mean_ap", r.mean}, {"sd_ap", r.sd}, {"ap", r.ap}});
  }
  report["methods"] = rows;
  write_file(dir / "concept_report.json", report.dump(2) + "\n");
  for (const auto& r : res.rows) {
    out << r.method << ": " << fmt(r.mean) << " +/- " << fmt(r.sd) << '\n';
  }
  return kExitOk;
}

// ---- viz-latent ----

int cmd_viz_latent(const RunConfig& c, std::ostream& out) {
  const auto m = load_model_checked(c);
  data::LoadReport rep;
  const auto ds = load_for_model(m, c, &rep);
  const auto batch = model::make_batch(ds.records);
  model::Matrix features = m.latents(batch);
  if (c.viz.layer == "penultimate") features = m.estimator.penultimate(features);
  const auto proj = eval::latent_projection(features.transpose());
  std::vector<std::optional<data::Label>> labels;
  for (const auto& r : ds.records) labels.push_back(r.label);

  const auto dir = prepare_out(c);
  write_resolved_config(dir, c);
  std::ostringstream csv;
  eval::write_projection_csv(csv, proj, labels);
  write_file(dir / "latent_projection.csv", csv.str());
  auto report = report_base(c, "viz-latent");
  report["layer"] = c.viz.layer;
  report["points"] = proj.points.rows();
  report["dimension"] = features.rows();
  report["singular_values"] = {proj.singular_values(0), proj.singular_values(1)};
  report["warnings"] = proj.warnings;
  write_file(dir / "viz_report.json", report.dump(2) + "\n");
  for (const auto& w : proj.warnings) out << "warning: " << w << '\n';
  out << "projected " << proj.points.rows() << " points\n";
  return kExitOk;
}

// ---- negsample-dump ----

int cmd_negsample_dump(const RunConfig& c, std::ostream& out) {
  data::Dataset ds;
  std::optional<model::ChadModel> m;
  if (!c.model_path.empty()) {
    m = load_model_checked(c);
    ds = load_for_model(*m, c, nullptr);
  } else {
    Requirements req;
    req.file(c.schema, "schema (or --model)");
    req.file(c.data, "data (--data)");
    req.check();
    const auto raw = data::load_csv(c.data, data::RecordSchema::load(c.schema));
    if (raw.records.empty()) throw DataError("no usable rows in '" + c.data + "'");
    ds = data::apply_normalize(data::fit_normalize(raw), raw);
  }
  const auto streams = SeedStreams::from_root(c.seed);
  const negsample::NegativeSampler sampler(c.schedule.negatives, ds.arities(),
                                           static_cast<int>(ds.schema.continuous_count()));
  const std::size_t n =
      c.dump.records == 0 ? ds.size() : std::min(c.dump.records, ds.size());

  std::vector<std::string> header{"source_id", "negative"};
  for (const auto& name : ds.schema.categorical_names()) header.push_back(name);
  for (const auto& name : ds.schema.continuous_names()) header.push_back(name);
  std::ostringstream csv;
  csv::write_row(csv, header);
  std::size_t rows = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& src = ds.records[i];
    const auto negs = sampler.generate(src, streams.negsampler, 0);
    for (std::size_t q = 0; q < negs.size(); ++q) {
      std::vector<std::string> row{std::to_string(src.id), std::to_string(q)};
      for (std::size_t w = 0; w < negs[q].categories.size(); ++w) {
        row.push_back(ds.vocabularies[w].decode(negs[q].categories[w]));
      }
      for (double v : negs[q].continuous) row.push_back(fmt(v));
      csv::write_row(csv, row);
      ++rows;
    }
  }
  const auto dir = prepare_out(c);
  write_resolved_config(dir, c);
  write_file(dir / "negatives.csv", csv.str());
  auto report = report_base(c, "negsample-dump");
  report["source_records"] = n;
  report["negatives"] = rows;
  report["max_categorical_fields"] = sampler.max_categorical_fields();
  write_file(dir / "negsample_report.json", report.dump(2) + "\n");
  out << "wrote " << rows << " negatives for " << n << " records\n";
  return kExitOk;
}

// ---- gen-synthetic ----

int cmd_gen_synthetic(const RunConfig& c, std::ostream& out) {
  auto gen = c.synthetic.generator;
  gen.rows = c.synthetic.generator.rows + c.synthetic.test_rows;
  gen.seed = c.seed;
  const auto all = synth::make_structured_dataset(gen);
  std::vector<data::Record> train_rows(all.records.begin(),
                                       all.records.begin() + static_cast<std::ptrdiff_t>(c.synthetic.generator.rows));
  std::vector<data::Record> test_rows(all.records.begin() + static_cast<std::ptrdiff_t>(c.synthetic.generator.rows),
                                      all.records.end());
  const auto dir = prepare_out(c);
  write_resolved_config(dir, c);
  std::ostringstream tr, te;
  synth::write_dataset_csv(tr, all.with_records(std::move(train_rows)));
  synth::write_dataset_csv(te, all.with_records(std::move(test_rows)));
  write_file(dir / "train.csv", tr.str());
  write_file(dir / "test.csv", te.str());
  write_file(dir / "schema.json", all.schema.to_json() + "\n");
  out << "wrote " << c.synthetic.generator.rows << " training and " << c.synthetic.test_rows
      << " test rows to " << dir.string() << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"chadkit: contrastive anomaly detection for heterogeneous tabular data"};
  app.require_subcommand(1);
  Overrides o;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON run configuration");
    sub->add_option("--seed", seed, "root seed (overrides the config)");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--model", o.model, "model file");
    sub->add_option("--data", o.data, "data CSV");
    return sub;
  };
  auto* train = add_common(app.add_subcommand("train", "train a model (phases 1-3)"));
  auto* score = add_common(app.add_subcommand("score", "score records; most anomalous first"));
  auto* evalc = add_common(app.add_subcommand("eval", "average precision, vary-anomaly table, noise ablation"));
  auto* bench = add_common(app.add_subcommand("bench-concept", "2-D conceptual benchmark"));
  auto* viz = add_common(app.add_subcommand("viz-latent", "2-D SVD projection of latents"));
  auto* dump = add_common(app.add_subcommand("negsample-dump", "write generated negatives as CSV"));
  auto* gen = add_common(app.add_subcommand("gen-synthetic", "write a structured synthetic dataset"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    CLI::App* active = app.get_subcommands().front();
    const bool seed_given = active->count("--seed") > 0;
    if (seed_given) o.seed = seed;
    const RunConfig c = resolve(o);
    if (active == train) return cmd_train(c, out);
    if (active == score) return cmd_score(c, out);
    if (active == evalc) return cmd_eval(c, out);
    if (active == bench) return cmd_bench_concept(c, out, seed_given);
    if (active == viz) return cmd_viz_latent(c, out);
    if (active == dump) return cmd_negsample_dump(c, out);
    if (active == gen) return cmd_gen_synthetic(c, out);
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

}  // namespace chadkit::cli
