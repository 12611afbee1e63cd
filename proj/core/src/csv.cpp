#include "chadkit/csv.hpp"

#include <istream>
#include <ostream>

#include "chadkit/errors.hpp"

namespace chadkit::csv {

Reader::Reader(std::istream& in) : in_(in) {}

bool Reader::next(Row& row) {
  row.clear();
  for (;;) {
    if (in_.peek() == std::char_traits<char>::eof()) return false;
    record_line_ = line_;
    std::string field;
    bool in_quotes = false;
    bool any = false;
    bool field_quoted = false;
    for (;;) {
      const int c = in_.get();
      if (c == std::char_traits<char>::eof()) {
        if (in_quotes) {
          throw DataError("unterminated quoted field starting on line " +
                          std::to_string(record_line_));
        }
        break;
      }
      any = true;
      const char ch = static_cast<char>(c);
      if (in_quotes) {
        if (ch == '"') {
          if (in_.peek() == '"') {
            in_.get();
            field.push_back('"');
          } else {
            in_quotes = false;
          }
        } else {
          if (ch == '\n') ++line_;
          field.push_back(ch);
        }
        continue;
      }
      if (ch == '"' && field.empty() && !field_quoted) {
        in_quotes = true;
        field_quoted = true;
      } else if (ch == ',') {
        row.push_back(std::move(field));
        field.clear();
        field_quoted = false;
      } else if (ch == '\r') {
        if (in_.peek() == '\n') in_.get();
        ++line_;
        break;
      } else if (ch == '\n') {
        ++line_;
        break;
      } else {
        field.push_back(ch);
      }
    }
    if (!any) return false;
    const bool blank = row.empty() && field.empty() && !field_quoted;
    if (blank) continue;
    row.push_back(std::move(field));
    return true;
  }
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const Row& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    out << escape(row[i]);
  }
  out << '\n';
}

}  // namespace chadkit::csv
