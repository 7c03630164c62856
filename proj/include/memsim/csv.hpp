#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace memsim {

/// Shortest round-trip text with at most 17 significant digits.
std::string format_number(double v);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  void add_row(const std::vector<double>& values);
  /// Row with leading text cells followed by numbers.
  void add_row(const std::vector<std::string>& text, const std::vector<double>& values);

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }
  std::string str() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::string> rows_;
};

/// Write to a sibling temp file and rename over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace memsim
