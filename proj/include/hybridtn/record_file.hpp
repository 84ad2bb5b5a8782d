#pragma once

// Reader for the declarative record format shared by rule files, format
// registries and template registries:
//
//   # comment
//   [rule score_keyword]
//   priority = 6
//   pre = (比分|比赛)
//   label = B_Score_Ratio
//
// A record starts at a "[kind name]" header and owns the "key = value" lines
// that follow it. Keys may repeat. The value is everything after the first
// '=' with surrounding blanks removed; an empty value is allowed. Lines whose
// first non-blank character is '#' are comments.

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hybridtn/error.hpp"

namespace hybridtn {

struct Record {
  std::string kind;
  std::string name;
  std::size_t line = 0;
  std::vector<std::pair<std::string, std::string>> fields;

  std::optional<std::string> get(std::string_view key) const {
    for (const auto& [k, v] : fields) {
      if (k == key) return v;
    }
    return std::nullopt;
  }

  std::string require(std::string_view key) const {
    auto v = get(key);
    if (!v) {
      throw ParseError(kind + " '" + name + "' is missing field '" +
                           std::string(key) + "'",
                       line);
    }
    return *v;
  }

  std::vector<std::string> get_all(std::string_view key) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : fields) {
      if (k == key) out.push_back(v);
    }
    return out;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto blank = [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n';
  };
  while (!s.empty() && blank(s.front())) s.remove_prefix(1);
  while (!s.empty() && blank(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace detail

inline std::vector<Record> parse_records(std::istream& in) {
  std::vector<Record> records;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("unterminated record header", lineno);
      const auto inner = detail::trim(line.substr(1, line.size() - 2));
      const auto sp = inner.find_first_of(" \t");
      if (sp == std::string_view::npos) {
        throw ParseError("record header needs '[kind name]'", lineno);
      }
      Record r;
      r.kind = std::string(inner.substr(0, sp));
      r.name = std::string(detail::trim(inner.substr(sp)));
      r.line = lineno;
      records.push_back(std::move(r));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("expected 'key = value'", lineno);
    }
    if (records.empty()) throw ParseError("field outside of a record", lineno);
    const auto key = detail::trim(line.substr(0, eq));
    if (key.empty()) throw ParseError("empty key", lineno);
    records.back().fields.emplace_back(std::string(key),
                                       std::string(detail::trim(line.substr(eq + 1))));
  }
  return records;
}

inline std::vector<Record> parse_records_string(const std::string& text) {
  std::istringstream in(text);
  return parse_records(in);
}

inline std::vector<Record> parse_records_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  try {
    return parse_records(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
}

}  // namespace hybridtn
