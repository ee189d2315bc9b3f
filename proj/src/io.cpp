#include "variscan/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <limits>
#include <sstream>

#include "variscan/errors.hpp"

namespace variscan::io {

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return std::string(s.substr(a, b - a));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(trim(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  cells.push_back(trim(cell));
  return cells;
}

std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const char* first = s.data();
  if (*first == '+') ++first;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    if (s == "nan" || s == "NaN" || s == "NA") return std::numeric_limits<double>::quiet_NaN();
    return std::nullopt;
  }
  return v;
}

std::string where(const std::filesystem::path& path, std::size_t line, std::size_t column) {
  return path.string() + ":" + std::to_string(line) + ", column " + std::to_string(column);
}

}  // namespace

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataValidationError("cannot write " + path.string());
  out << text;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      table.comments.push_back(trim(std::string_view(t).substr(1)));
      continue;
    }
    auto cells = split_line(t);
    if (first) {
      first = false;
      width = cells.size();
      bool any_numeric = false;
      for (const auto& c : cells) {
        if (parse_double(c)) any_numeric = true;
      }
      if (!any_numeric) {
        table.header = std::move(cells);
        continue;
      }
    }
    if (cells.size() != width) {
      throw DataValidationError("ragged row at " + path.string() + ":" + std::to_string(line_no) +
                                ": expected " + std::to_string(width) + " cells, found " +
                                std::to_string(cells.size()));
    }
    table.rows.push_back(std::move(cells));
    table.line_numbers.push_back(line_no);
  }
  return table;
}

CovariateMatrix ingest_covariates(const std::filesystem::path& path, std::vector<std::string>* names) {
  const CsvTable table = read_csv(path);
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  const auto p = static_cast<Eigen::Index>(table.rows.empty() ? table.header.size() : table.rows[0].size());
  if (n < 2 || p < 2) {
    throw DataValidationError(path.string() + ": need at least 2 rows and 2 columns, found " +
                              std::to_string(n) + "x" + std::to_string(p));
  }
  CovariateMatrix x(Eigen::MatrixXd::Zero(n, p));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < p; ++j) {
      const std::string& cell = row[static_cast<std::size_t>(j)];
      if (cell.empty()) {
        x.missing(i, j) = true;
        continue;
      }
      const auto v = parse_double(cell);
      const std::size_t line = table.line_numbers[static_cast<std::size_t>(i)];
      if (!v) {
        throw DataValidationError("non-numeric cell '" + cell + "' at " +
                                  where(path, line, static_cast<std::size_t>(j) + 1));
      }
      if (std::isnan(*v)) {
        x.missing(i, j) = true;
      } else if (!std::isfinite(*v)) {
        throw DataValidationError("non-finite cell at " + where(path, line, static_cast<std::size_t>(j) + 1));
      } else {
        x.values(i, j) = *v;
      }
    }
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    if (x.missing.col(j).count() == n) {
      throw DataValidationError(path.string() + ": column " + std::to_string(j + 1) + " has no observed values");
    }
  }
  x.validate();
  if (names) *names = table.header;
  return x;
}

OutcomeTable ingest_outcome(const std::filesystem::path& path, std::optional<Family> family) {
  const CsvTable table = read_csv(path);
  if (table.rows.size() < 2) throw DataValidationError(path.string() + ": need at least 2 outcome rows");
  const std::size_t width = table.rows[0].size();
  if (width != 2 && width != 3) {
    throw DataValidationError(path.string() + ": expected columns subject-id, w[, delta], found " +
                              std::to_string(width));
  }
  OutcomeTable out;
  const bool has_delta = width == 3;
  out.data.family = family.value_or(has_delta ? Family::aft : Family::gaussian);
  if (out.data.family == Family::aft && !has_delta) {
    throw DataValidationError(path.string() + ": the AFT family needs a delta column");
  }
  const std::size_t n = table.rows.size();
  out.data.w.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = table.rows[i];
    const std::size_t line = table.line_numbers[i];
    if (row[0].empty()) throw DataValidationError("empty subject id at " + where(path, line, 1));
    out.subject_ids.push_back(row[0]);
    const auto w = parse_double(row[1]);
    if (!w || !std::isfinite(*w)) {
      throw DataValidationError("invalid outcome '" + row[1] + "' at " + where(path, line, 2));
    }
    out.data.w[static_cast<Eigen::Index>(i)] = *w;
    if (has_delta && out.data.family == Family::aft) {
      if (row[2] != "0" && row[2] != "1") {
        throw DataValidationError("delta must be 0 or 1 at " + where(path, line, 3));
      }
      out.data.delta.push_back(row[2] == "1" ? 1 : 0);
    }
  }
  std::vector<std::string> sorted = out.subject_ids;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw DataValidationError(path.string() + ": duplicate subject ids");
  }
  out.data.validate();
  return out;
}

std::optional<std::string> read_config_hash(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string line;
  const std::string key = "variscan config-hash=";
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] != '#') break;
    const auto pos = t.find(key);
    if (pos != std::string::npos) return trim(std::string_view(t).substr(pos + key.size()));
  }
  return std::nullopt;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw NumericalError("format_double: conversion failed");
  return std::string(buf, ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::string& config_hash)
    : out_(path, std::ios::binary), path_(path) {
  if (!out_) throw DataValidationError("cannot write " + path.string());
  out_ << "# variscan config-hash=" << config_hash << '\n';
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  for (std::size_t j = 0; j < cells.size(); ++j) {
    if (j) out_ << ',';
    const std::string& c = cells[j];
    if (c.find_first_of(",\"\n") != std::string::npos) {
      out_ << '"';
      for (char ch : c) {
        if (ch == '"') out_ << '"';
        out_ << ch;
      }
      out_ << '"';
    } else {
      out_ << c;
    }
  }
  out_ << '\n';
  if (!out_) throw DataValidationError("write failed: " + path_.string());
}

void write_matrix(const std::filesystem::path& path, const std::string& config_hash,
                  const Eigen::MatrixXd& m, const std::vector<std::string>& header) {
  CsvWriter out(path, config_hash);
  if (!header.empty()) out.row(header);
  std::vector<std::string> cells(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      cells[static_cast<std::size_t>(j)] = std::isnan(v) ? std::string() : format_double(v);
    }
    out.row(cells);
  }
}

const std::string& EffectiveConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw DataValidationError("config key missing: " + key);
  return it->second;
}

std::string EffectiveConfig::text() const {
  std::string s;
  for (const auto& [k, v] : values_) s += k + "=" + v + "\n";
  return s;
}

std::string EffectiveConfig::hash() const { return fnv1a_hex(text()); }

void EffectiveConfig::write(const std::filesystem::path& path) const {
  write_text(path, "# variscan config-hash=" + hash() + "\n" + text());
}

EffectiveConfig EffectiveConfig::read(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  EffectiveConfig c;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataValidationError(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    }
    c.values_[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return c;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_fingerprint(const std::filesystem::path& path) { return fnv1a_hex(read_text(path)); }

}  // namespace variscan::io
