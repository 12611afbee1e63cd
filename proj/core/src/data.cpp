#include "chadkit/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "chadkit/csv.hpp"
#include "chadkit/errors.hpp"
#include "chadkit/rng.hpp"
#include <nlohmann/json.hpp>

namespace chadkit::data {

using ordered_json = nlohmann::ordered_json;

const char* to_string(FieldKind k) {
  switch (k) {
    case FieldKind::categorical: return "categorical";
    case FieldKind::continuous: return "continuous";
    case FieldKind::label: return "label";
    case FieldKind::ignore: return "ignore";
  }
  return "?";
}

namespace {

FieldKind kind_from_string(const std::string& s, const std::string& field) {
  if (s == "categorical") return FieldKind::categorical;
  if (s == "continuous") return FieldKind::continuous;
  if (s == "label") return FieldKind::label;
  if (s == "ignore") return FieldKind::ignore;
  throw SchemaError("field '" + field + "': unknown type '" + s + "'");
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

}  // namespace

RecordSchema::RecordSchema(std::vector<FieldSpec> columns,
                           std::vector<std::string> nominal_labels)
    : columns_(std::move(columns)), nominal_labels_(std::move(nominal_labels)) {
  std::vector<std::string> seen;
  for (const auto& c : columns_) {
    if (c.name.empty()) throw SchemaError("schema field names must be non-empty");
    if (std::find(seen.begin(), seen.end(), c.name) != seen.end()) {
      throw SchemaError("duplicate schema field '" + c.name + "'");
    }
    seen.push_back(c.name);
    switch (c.kind) {
      case FieldKind::categorical: categorical_.push_back(c.name); break;
      case FieldKind::continuous: continuous_.push_back(c.name); break;
      case FieldKind::label:
        if (label_) throw SchemaError("schema declares more than one label column");
        label_ = c.name;
        break;
      case FieldKind::ignore: break;
    }
  }
  if (categorical_.size() + continuous_.size() == 0) {
    throw SchemaError("schema needs at least one categorical or continuous field");
  }
}

RecordSchema RecordSchema::from_json(std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("schema is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("schema must be a JSON object");
  std::vector<FieldSpec> cols;
  std::vector<std::string> nominal{"0", "nominal", "normal"};
  for (const auto& [name, value] : j.items()) {
    FieldSpec f{name, FieldKind::continuous};
    if (value.is_string()) {
      f.kind = kind_from_string(value.get<std::string>(), name);
    } else if (value.is_object()) {
      for (const auto& [key, _] : value.items()) {
        if (key != "type" && key != "nominal") {
          throw SchemaError("field '" + name + "': unknown key '" + key + "'");
        }
      }
      if (!value.contains("type") || !value["type"].is_string()) {
        throw SchemaError("field '" + name + "' needs a string \"type\"");
      }
      f.kind = kind_from_string(value["type"].get<std::string>(), name);
      if (value.contains("nominal")) {
        if (f.kind != FieldKind::label) {
          throw SchemaError("field '" + name + "': \"nominal\" only applies to labels");
        }
        nominal = value["nominal"].get<std::vector<std::string>>();
      }
    } else {
      throw SchemaError("field '" + name + "' must map to a type string or object");
    }
    cols.push_back(std::move(f));
  }
  return RecordSchema(std::move(cols), std::move(nominal));
}

RecordSchema RecordSchema::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string RecordSchema::to_json() const {
  ordered_json j = ordered_json::object();
  for (const auto& c : columns_) {
    if (c.kind == FieldKind::label) {
      j[c.name] = {{"type", "label"}, {"nominal", nominal_labels_}};
    } else {
      j[c.name] = to_string(c.kind);
    }
  }
  return j.dump();
}

Label RecordSchema::parse_label(std::string_view cell) const {
  const auto v = trim(cell);
  for (const auto& n : nominal_labels_) {
    if (v == n) return Label::nominal;
  }
  return Label::anomaly;
}

int Vocabulary::encode(std::string_view value) const {
  const auto it = index_.find(std::string(value));
  return it == index_.end() ? -1 : it->second;
}

const std::string& Vocabulary::decode(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= values_.size()) {
    throw SchemaError("vocabulary index " + std::to_string(index) + " out of range");
  }
  return values_[static_cast<std::size_t>(index)];
}

int Vocabulary::add(std::string value) {
  if (const int existing = encode(value); existing >= 0) return existing;
  const int idx = static_cast<int>(values_.size());
  index_.emplace(value, idx);
  values_.push_back(std::move(value));
  return idx;
}

std::vector<int> Dataset::arities() const {
  std::vector<int> out;
  out.reserve(vocabularies.size());
  for (const auto& v : vocabularies) out.push_back(static_cast<int>(v.size()));
  return out;
}

Dataset Dataset::with_records(std::vector<Record> rs) const {
  Dataset d;
  d.schema = schema;
  d.vocabularies = vocabularies;
  d.records = std::move(rs);
  return d;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  std::vector<Record> rs;
  rs.reserve(indices.size());
  for (auto i : indices) rs.push_back(records.at(i));
  return with_records(std::move(rs));
}

std::string LoadReport::to_json() const {
  ordered_json j;
  j["rows_read"] = rows_read;
  j["rows_kept"] = rows_kept;
  j["rows_dropped"] = {{"missing", dropped_missing}, {"unseen_category", dropped_unseen}};
  j["unseen_row_ids"] = unseen_row_ids;
  j["ignored_columns"] = ignored_columns;
  ordered_json ar = ordered_json::object();
  for (const auto& [name, a] : arities) ar[name] = a;
  j["arity"] = ar;
  return j.dump(2);
}

Dataset load_csv(const std::string& path, const RecordSchema& schema,
                 const LoadOptions& options, LoadReport* report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open data file '" + path + "'");
  return read_csv(in, schema, options, report);
}

Dataset read_csv(std::istream& in, const RecordSchema& schema,
                 const LoadOptions& options, LoadReport* report) {
  csv::Reader reader(in);
  csv::Row header;
  if (!reader.next(header)) throw DataError("data file is empty (no header row)");
  for (auto& h : header) h = std::string(trim(h));

  // Column position of each schema field in the file.
  std::vector<std::size_t> cat_col, cont_col;
  std::optional<std::size_t> label_col;
  auto find_col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("missing column '" + name + "' in header");
    return static_cast<std::size_t>(it - header.begin());
  };
  for (const auto& n : schema.categorical_names()) cat_col.push_back(find_col(n));
  for (const auto& n : schema.continuous_names()) cont_col.push_back(find_col(n));
  // The label column is optional: unlabeled files load with no labels.
  if (schema.label_column()) {
    const auto it = std::find(header.begin(), header.end(), *schema.label_column());
    if (it != header.end()) label_col = static_cast<std::size_t>(it - header.begin());
  }

  LoadReport local;
  LoadReport& rep = report ? *report : local;
  rep = LoadReport{};
  for (const auto& h : header) {
    const bool known = std::any_of(schema.columns().begin(), schema.columns().end(),
                                   [&](const FieldSpec& f) {
                                     return f.name == h && f.kind != FieldKind::ignore;
                                   });
    if (!known) rep.ignored_columns.push_back(h);
  }

  Dataset ds;
  ds.schema = schema;
  const bool frozen = options.frozen_vocabularies != nullptr;
  if (frozen) {
    if (options.frozen_vocabularies->size() != schema.categorical_count()) {
      throw SchemaError("vocabulary count does not match categorical field count");
    }
    ds.vocabularies = *options.frozen_vocabularies;
  } else {
    ds.vocabularies.resize(schema.categorical_count());
    if (options.reserve_unknown) {
      for (auto& v : ds.vocabularies) v.add(std::string(kUnknownToken));
    }
  }

  csv::Row row;
  std::uint64_t data_row = 0;
  while (reader.next(row)) {
    const std::uint64_t id = data_row++;
    ++rep.rows_read;
    if (row.size() != header.size()) {
      throw DataError("malformed row on line " + std::to_string(reader.line()) +
                      ": expected " + std::to_string(header.size()) +
                      " fields, got " + std::to_string(row.size()));
    }
    bool missing = false;
    for (auto c : cat_col) missing |= trim(row[c]).empty();
    for (auto c : cont_col) missing |= trim(row[c]).empty();
    if (label_col) missing |= trim(row[*label_col]).empty();
    if (missing) {
      ++rep.dropped_missing;
      continue;
    }

    Record rec;
    rec.id = id;
    rec.continuous.reserve(cont_col.size());
    for (std::size_t j = 0; j < cont_col.size(); ++j) {
      const auto cell = trim(row[cont_col[j]]);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw DataError("non-numeric value '" + std::string(cell) + "' in column '" +
                        schema.continuous_names()[j] + "' on line " +
                        std::to_string(reader.line()));
      }
      rec.continuous.push_back(v);
    }

    bool unseen = false;
    rec.categories.reserve(cat_col.size());
    for (std::size_t w = 0; w < cat_col.size(); ++w) {
      const std::string value(trim(row[cat_col[w]]));
      if (!frozen) {
        rec.categories.push_back(ds.vocabularies[w].add(value));
        continue;
      }
      int idx = ds.vocabularies[w].encode(value);
      if (idx < 0) {
        if (options.unseen == UnseenPolicy::reserved) {
          idx = ds.vocabularies[w].encode(kUnknownToken);
          if (idx < 0) {
            throw ConfigError("unseen-category policy 'reserved' needs a vocabulary "
                              "built with a reserved unknown slot");
          }
        } else {
          unseen = true;
        }
      }
      rec.categories.push_back(idx);
    }
    if (unseen) {
      ++rep.dropped_unseen;
      rep.unseen_row_ids.push_back(id);
      continue;
    }
    if (label_col) rec.label = schema.parse_label(row[*label_col]);
    ds.records.push_back(std::move(rec));
  }
  rep.rows_kept = ds.records.size();
  for (std::size_t w = 0; w < ds.vocabularies.size(); ++w) {
    rep.arities.emplace_back(schema.categorical_names()[w], ds.vocabularies[w].size());
  }
  return ds;
}

Dataset filter_rare_entities(const Dataset& dataset, std::size_t min_count) {
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  const std::size_t k = dataset.vocabularies.size();
  std::vector<const Record*> alive;
  alive.reserve(dataset.records.size());
  for (const auto& r : dataset.records) alive.push_back(&r);

  for (;;) {
    std::vector<std::vector<std::size_t>> counts(k);
    for (std::size_t w = 0; w < k; ++w) counts[w].assign(dataset.vocabularies[w].size(), 0);
    for (const auto* r : alive) {
      for (std::size_t w = 0; w < k; ++w) ++counts[w][static_cast<std::size_t>(r->categories[w])];
    }
    std::vector<const Record*> next;
    next.reserve(alive.size());
    for (const auto* r : alive) {
      bool keep = true;
      for (std::size_t w = 0; w < k && keep; ++w) {
        keep = counts[w][static_cast<std::size_t>(r->categories[w])] >= min_count;
      }
      if (keep) next.push_back(r);
    }
    if (next.size() == alive.size()) break;
    alive = std::move(next);
  }

  Dataset out;
  out.schema = dataset.schema;
  out.vocabularies.resize(k);
  std::vector<std::vector<int>> remap(k);
  for (std::size_t w = 0; w < k; ++w) {
    remap[w].assign(dataset.vocabularies[w].size(), -1);
    // Keep the reserved slot at index 0 when present.
    if (const int unk = dataset.vocabularies[w].encode(kUnknownToken); unk >= 0) {
      remap[w][static_cast<std::size_t>(unk)] = out.vocabularies[w].add(std::string(kUnknownToken));
    }
  }
  out.records.reserve(alive.size());
  for (const auto* r : alive) {
    Record rec = *r;
    for (std::size_t w = 0; w < k; ++w) {
      auto& slot = remap[w][static_cast<std::size_t>(r->categories[w])];
      if (slot < 0) slot = out.vocabularies[w].add(dataset.vocabularies[w].decode(r->categories[w]));
      rec.categories[w] = slot;
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

double NormalizationStats::apply(std::size_t field, double value) const {
  const double lo = min[field];
  const double hi = max[field];
  if (!(hi > lo)) return 0.5;
  return (value - lo) / (hi - lo);
}

NormalizationStats fit_normalize(const Dataset& train, std::vector<std::string>* warnings) {
  const std::size_t r = train.schema.continuous_count();
  NormalizationStats s;
  s.names = train.schema.continuous_names();
  s.min.assign(r, 0.0);
  s.max.assign(r, 0.0);
  if (train.records.empty()) {
    if (warnings && r > 0) warnings->push_back("normalization fitted on an empty dataset");
    return s;
  }
  for (std::size_t j = 0; j < r; ++j) {
    double lo = train.records.front().continuous[j];
    double hi = lo;
    for (const auto& rec : train.records) {
      lo = std::min(lo, rec.continuous[j]);
      hi = std::max(hi, rec.continuous[j]);
    }
    s.min[j] = lo;
    s.max[j] = hi;
    if (!(hi > lo) && warnings) {
      warnings->push_back("continuous field '" + s.names[j] +
                          "' is constant on the training data; mapped to 0.5");
    }
  }
  return s;
}

Dataset apply_normalize(const NormalizationStats& stats, const Dataset& dataset, bool clamp) {
  if (stats.min.size() != dataset.schema.continuous_count()) {
    throw SchemaError("normalization stats do not match the continuous field count");
  }
  Dataset out = dataset;
  for (auto& rec : out.records) {
    for (std::size_t j = 0; j < rec.continuous.size(); ++j) {
      double v = stats.apply(j, rec.continuous[j]);
      if (clamp) v = std::clamp(v, 0.0, 1.0);
      rec.continuous[j] = v;
    }
  }
  return out;
}

BatchIterator::BatchIterator(std::size_t count, std::size_t batch_size, std::uint64_t seed)
    : count_(count), batch_size_(batch_size), seed_(seed) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

std::size_t BatchIterator::batches_per_epoch() const {
  return (count_ + batch_size_ - 1) / batch_size_;
}

std::vector<std::vector<std::size_t>> BatchIterator::epoch(std::size_t index) const {
  std::vector<std::size_t> order(count_);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed_, index));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  batches.reserve(batches_per_epoch());
  for (std::size_t start = 0; start < count_; start += batch_size_) {
    const std::size_t end = std::min(count_, start + batch_size_);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace chadkit::data
