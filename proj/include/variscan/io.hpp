#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "variscan/covariates.hpp"
#include "variscan/regression.hpp"

namespace variscan::io {

/// Parsed CSV: comment lines (leading '#') dropped, optional header row.
struct CsvTable {
  std::vector<std::string> header;  // empty when the file has none
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row
  std::vector<std::string> comments;      // text after '#', in order
};

// Reads the file; the first row is taken as a header when none of its cells
// parse as numbers. Throws DataValidationError on unreadable or ragged input.
CsvTable read_csv(const std::filesystem::path& path);

// Empty cells become missing; anything else must parse fully as a double.
CovariateMatrix ingest_covariates(const std::filesystem::path& path,
                                  std::vector<std::string>* names = nullptr);

struct OutcomeTable {
  std::vector<std::string> subject_ids;
  OutcomeData data;
};

// Columns: subject-id, w, and optionally delta (0/1). With no delta column the
// family is Gaussian unless `family` says otherwise; with one it defaults to AFT.
OutcomeTable ingest_outcome(const std::filesystem::path& path,
                            std::optional<Family> family = std::nullopt);

// Value of a config-hash comment, if the file carries one.
std::optional<std::string> read_config_hash(const std::filesystem::path& path);

// Shortest text that parses back to the same double (at most 17 significant digits).
std::string format_double(double v);

/// Line-oriented CSV writer. Every file starts with the config-hash comment.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& config_hash);

  void row(const std::vector<std::string>& cells);

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

// Writes a numeric matrix; NaN entries become empty cells.
void write_matrix(const std::filesystem::path& path, const std::string& config_hash,
                  const Eigen::MatrixXd& m, const std::vector<std::string>& header = {});

/// Effective configuration: ordered key=value pairs with defaults resolved.
class EffectiveConfig {
 public:
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void set(const std::string& key, const char* value) { values_[key] = value; }
  void set(const std::string& key, double value) { values_[key] = format_double(value); }
  void set(const std::string& key, std::int64_t value) { values_[key] = std::to_string(value); }
  void set(const std::string& key, int value) { values_[key] = std::to_string(value); }
  void set(const std::string& key, bool value) { values_[key] = value ? "true" : "false"; }

  const std::string& get(const std::string& key) const;
  bool contains(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string text() const;
  // 64-bit FNV-1a of text(), as 16 hex digits.
  std::string hash() const;

  void write(const std::filesystem::path& path) const;
  static EffectiveConfig read(const std::filesystem::path& path);

 private:
  std::map<std::string, std::string> values_;
};

std::string fnv1a_hex(const std::string& bytes);
// FNV-1a of the file's bytes.
std::string file_fingerprint(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace variscan::io
