#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace chadkit::csv {

using Row = std::vector<std::string>;

// RFC-4180 reader: comma separated, double-quote quoting with "" escapes,
// quoted fields may span lines, CRLF or LF line endings. Throws DataError
// with the 1-based line number on an unterminated quote.
class Reader {
 public:
  explicit Reader(std::istream& in);

  // Reads the next record; false at end of input. Blank lines are skipped.
  bool next(Row& row);

  // Line number where the most recently returned record started.
  std::size_t line() const { return record_line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 1;
  std::size_t record_line_ = 0;
};

// Quotes a field when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);
void write_row(std::ostream& out, const Row& row);

}  // namespace chadkit::csv
