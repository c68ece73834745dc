#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "semtree/errors.hpp"

namespace semtree {

// RFC-4180 style quoting: only fields containing comma, quote or newline are wrapped.
inline std::string csv_escape(const std::string& field) {
  bool needs_quote = field.find_first_of(",\"\n\r") != std::string::npos;
  if (!needs_quote) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += "\"\"";
    else out += ch;
  }
  out += "\"";
  return out;
}

inline std::string csv_join(const std::vector<std::string>& fields) {
  std::string line;
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) line += ",";
    line += csv_escape(fields[i]);
  }
  return line;
}

// Splits one CSV record. Handles quoted fields; does not handle embedded newlines
// (callers here never produce them in numeric tables).
inline std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool in_quotes = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char ch = line[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      in_quotes = true;
    } else if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch == '\r') {
      // tolerated at end of line
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("csv: cannot open " + path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = csv_split(line);
    if (first) {
      table.header = std::move(fields);
      first = false;
    } else {
      if (fields.size() != table.header.size())
        throw ParseError("csv: row width mismatch in " + path);
      table.rows.push_back(std::move(fields));
    }
  }
  if (first) throw ParseError("csv: empty file " + path);
  return table;
}

} // namespace semtree
