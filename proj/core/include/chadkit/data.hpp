#pragma once

// Schema-typed tabular data: categorical fields encoded through per-field
// vocabularies, continuous fields min-max normalized onto [0,1].

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace chadkit::data {

enum class FieldKind { categorical, continuous, label, ignore };

const char* to_string(FieldKind k);

struct FieldSpec {
  std::string name;
  FieldKind kind = FieldKind::continuous;
};

enum class Label : std::uint8_t { nominal = 0, anomaly = 1 };

// Column layout of a CSV file. Categorical fields are numbered 0..k-1 and
// continuous fields 0..r-1 in order of appearance. At most one label column.
class RecordSchema {
 public:
  RecordSchema() = default;
  explicit RecordSchema(std::vector<FieldSpec> columns,
                        std::vector<std::string> nominal_labels = {"0", "nominal",
                                                                   "normal"});

  // Accepts {"name": "categorical" | "continuous" | "label" | "ignore", ...}
  // where a value may also be an object {"type": ..., "nominal": [...]}.
  static RecordSchema from_json(std::string_view text);
  static RecordSchema load(const std::string& path);
  std::string to_json() const;

  const std::vector<FieldSpec>& columns() const { return columns_; }
  const std::vector<std::string>& categorical_names() const { return categorical_; }
  const std::vector<std::string>& continuous_names() const { return continuous_; }
  const std::optional<std::string>& label_column() const { return label_; }
  const std::vector<std::string>& nominal_labels() const { return nominal_labels_; }

  std::size_t categorical_count() const { return categorical_.size(); }
  std::size_t continuous_count() const { return continuous_.size(); }

  // Maps a raw label cell onto a Label.
  Label parse_label(std::string_view cell) const;

 private:
  std::vector<FieldSpec> columns_;
  std::vector<std::string> categorical_;
  std::vector<std::string> continuous_;
  std::optional<std::string> label_;
  std::vector<std::string> nominal_labels_;
};

inline constexpr std::string_view kUnknownToken = "<unk>";

// Bidirectional map between entity strings and dense indices.
class Vocabulary {
 public:
  // Returns the index of value, or -1 if unseen.
  int encode(std::string_view value) const;
  const std::string& decode(int index) const;
  int add(std::string value);
  std::size_t size() const { return values_.size(); }
  const std::vector<std::string>& values() const { return values_; }
  bool has_unknown_slot() const { return encode(kUnknownToken) >= 0; }

 private:
  std::vector<std::string> values_;
  std::unordered_map<std::string, int> index_;
};

struct Record {
  std::uint64_t id = 0;           // 0-based data row in the source file
  std::vector<int> categories;    // one index per categorical field
  std::vector<double> continuous;
  std::optional<Label> label;
};

struct Dataset {
  RecordSchema schema;
  std::vector<Vocabulary> vocabularies;  // one per categorical field
  std::vector<Record> records;

  std::size_t size() const { return records.size(); }
  std::vector<int> arities() const;
  Dataset with_records(std::vector<Record> rs) const;
  Dataset subset(const std::vector<std::size_t>& indices) const;
};

enum class UnseenPolicy { reject, reserved };

struct LoadOptions {
  // When set, categorical values are encoded against these vocabularies
  // instead of building new ones.
  const std::vector<Vocabulary>* frozen_vocabularies = nullptr;
  UnseenPolicy unseen = UnseenPolicy::reject;
  // Building mode only: reserve index 0 of every vocabulary for unseen values.
  bool reserve_unknown = false;
};

struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t rows_kept = 0;
  std::size_t dropped_missing = 0;
  std::size_t dropped_unseen = 0;
  std::vector<std::uint64_t> unseen_row_ids;
  std::vector<std::string> ignored_columns;
  std::vector<std::pair<std::string, std::size_t>> arities;

  std::string to_json() const;
};

Dataset load_csv(const std::string& path, const RecordSchema& schema,
                 const LoadOptions& options = {}, LoadReport* report = nullptr);
Dataset read_csv(std::istream& in, const RecordSchema& schema,
                 const LoadOptions& options = {}, LoadReport* report = nullptr);

// Drops every row holding a categorical value seen fewer than min_count
// times, repeated until no such value remains, then re-indexes the
// vocabularies over the surviving values (first-appearance order).
Dataset filter_rare_entities(const Dataset& dataset, std::size_t min_count);

struct NormalizationStats {
  std::vector<std::string> names;
  std::vector<double> min;
  std::vector<double> max;

  double apply(std::size_t field, double value) const;
};

// Per-field min/max on the given (training) data. Constant fields produce a
// warning and later map to 0.5.
NormalizationStats fit_normalize(const Dataset& train,
                                 std::vector<std::string>* warnings = nullptr);
Dataset apply_normalize(const NormalizationStats& stats, const Dataset& dataset,
                        bool clamp = false);

// Seeded mini-batch order. Each epoch gets an independent shuffle derived
// from (seed, epoch); the last partial batch is kept.
class BatchIterator {
 public:
  BatchIterator(std::size_t count, std::size_t batch_size, std::uint64_t seed);

  std::vector<std::vector<std::size_t>> epoch(std::size_t index) const;
  std::size_t batches_per_epoch() const;

 private:
  std::size_t count_;
  std::size_t batch_size_;
  std::uint64_t seed_;
};

}  // namespace chadkit::data
