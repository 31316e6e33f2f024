#pragma once

#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "semimol/chem/smiles.hpp"
#include "semimol/errors.hpp"

namespace semimol::data {

enum class SplitTag { Train, Val, Test };

struct LabeledRecord {
  std::string smiles;
  double y = 0.0;
  std::optional<SplitTag> split_tag;
  bool cliff_flag = false;
};

struct UnlabeledRecord {
  std::string smiles;
};

struct LoadReport {
  int total_rows = 0;
  int kept = 0;
  int dropped_smiles = 0;  // SMILES that failed to parse
  int dropped_label = 0;   // non-numeric labels
  int dropped_split = 0;   // unrecognized split tags
  int dropped() const { return dropped_smiles + dropped_label + dropped_split; }
};

struct ColumnMap {
  std::string smiles = "smiles";
  std::string label = "label";
  std::string split = "split";  // optional column
};

namespace detail {

// Minimal CSV field splitter; supports double-quoted fields with "" escapes.
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<SplitTag> parse_split_tag(const std::string& s) {
  if (s == "train") return SplitTag::Train;
  if (s == "val" || s == "valid" || s == "validation") return SplitTag::Val;
  if (s == "test") return SplitTag::Test;
  return std::nullopt;
}

}  // namespace detail

// Loads a labeled CSV with a header row. Rows whose SMILES do not parse (or
// whose label is not numeric) are dropped and counted in the report.
inline std::vector<LabeledRecord> load_labeled_csv(const std::string& path,
                                                   const ColumnMap& cols,
                                                   LoadReport* report = nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open labeled CSV: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty CSV: " + path);
  const auto header = detail::split_csv_line(line);
  int smiles_col = -1, label_col = -1, split_col = -1;
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == cols.smiles) smiles_col = static_cast<int>(i);
    if (header[i] == cols.label) label_col = static_cast<int>(i);
    if (header[i] == cols.split) split_col = static_cast<int>(i);
  }
  if (smiles_col < 0) throw MissingColumn("missing column '" + cols.smiles + "' in " + path);
  if (label_col < 0) throw MissingColumn("missing column '" + cols.label + "' in " + path);

  LoadReport local;
  LoadReport& rep = report ? *report : local;
  std::vector<LabeledRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rep.total_rows++;
    const auto fields = detail::split_csv_line(line);
    if (static_cast<int>(fields.size()) <= std::max(smiles_col, label_col)) {
      rep.dropped_label++;
      continue;
    }
    LabeledRecord rec;
    rec.smiles = fields[smiles_col];
    const auto y = detail::parse_double(fields[label_col]);
    if (!y) {
      rep.dropped_label++;
      continue;
    }
    rec.y = *y;
    if (split_col >= 0 && split_col < static_cast<int>(fields.size()) &&
        !fields[split_col].empty()) {
      const auto tag = detail::parse_split_tag(fields[split_col]);
      if (!tag) {
        rep.dropped_split++;
        continue;
      }
      rec.split_tag = tag;
    }
    try {
      chem::parse_smiles(rec.smiles);
    } catch (const ParseError&) {
      rep.dropped_smiles++;
      continue;
    }
    rep.kept++;
    records.push_back(std::move(rec));
  }
  return records;
}

// Unlabeled pool file: one SMILES per line, '#' starts a comment, blank
// lines skipped. Unparseable entries are dropped and counted.
inline std::vector<UnlabeledRecord> load_pool(const std::string& path,
                                              LoadReport* report = nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pool file: " + path);
  LoadReport local;
  LoadReport& rep = report ? *report : local;
  std::vector<UnlabeledRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t')) line.pop_back();
    size_t start = 0;
    while (start < line.size() && (line[start] == ' ' || line[start] == '\t')) ++start;
    line = line.substr(start);
    if (line.empty()) continue;
    rep.total_rows++;
    try {
      chem::parse_smiles(line);
    } catch (const ParseError&) {
      rep.dropped_smiles++;
      continue;
    }
    rep.kept++;
    out.push_back({line});
  }
  return out;
}

}  // namespace semimol::data
