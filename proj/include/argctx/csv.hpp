#pragma once

// Minimal RFC-4180 reader/writer. Records may span lines inside quotes; each
// record remembers the physical line it started on for error reporting.

#include <cstddef>
#include <istream>
#include <iterator>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "argctx/error.hpp"

namespace argctx::csv {

struct Record {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

/// Parses the full stream. `source` only labels error messages.
inline std::vector<Record> read_all(std::istream& in, const std::string& source) {
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<Record> records;
  std::size_t line = 1;
  std::size_t pos = 0;
  if (data.starts_with("\xEF\xBB\xBF")) pos = 3;

  while (pos < data.size()) {
    Record rec;
    rec.line = line;
    std::string field;
    bool in_quotes = false;
    bool was_quoted = false;
    bool done = false;
    while (!done) {
      if (pos >= data.size()) {
        if (in_quotes) throw DataError(source, rec.line, "unterminated quoted field");
        rec.fields.push_back(std::move(field));
        break;
      }
      const char c = data[pos];
      if (in_quotes) {
        if (c == '"') {
          if (pos + 1 < data.size() && data[pos + 1] == '"') {
            field += '"';
            pos += 2;
          } else {
            in_quotes = false;
            ++pos;
          }
        } else {
          if (c == '\n') ++line;
          field += c;
          ++pos;
        }
        continue;
      }
      switch (c) {
        case '"':
          if (!field.empty() || was_quoted) {
            throw DataError(source, line, "quote character inside unquoted field");
          }
          in_quotes = was_quoted = true;
          ++pos;
          break;
        case ',':
          rec.fields.push_back(std::move(field));
          field.clear();
          was_quoted = false;
          ++pos;
          break;
        case '\r':
          ++pos;
          if (pos < data.size() && data[pos] == '\n') break;
          [[fallthrough]];
        case '\n':
          if (c == '\n') ++pos;
          ++line;
          rec.fields.push_back(std::move(field));
          done = true;
          break;
        default:
          if (was_quoted) throw DataError(source, line, "characters after closing quote");
          field += c;
          ++pos;
      }
    }
    // Blank lines carry no record.
    if (rec.fields.size() == 1 && rec.fields[0].empty()) continue;
    records.push_back(std::move(rec));
  }
  return records;
}

inline std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << quote(fields[i]);
  }
  out << '\n';
}

}  // namespace argctx::csv
