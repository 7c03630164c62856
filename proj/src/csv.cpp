#include "memsim/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <system_error>

#include "memsim/linalg.hpp"

namespace memsim {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";  // folds -0
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
  if (header_.empty()) throw ValidationError("csv: empty header");
}

void CsvTable::add_row(const std::vector<double>& values) { add_row({}, values); }

void CsvTable::add_row(const std::vector<std::string>& text, const std::vector<double>& values) {
  if (text.size() + values.size() != header_.size()) {
    throw ValidationError("csv: row width does not match header");
  }
  std::string line;
  bool first = true;
  for (const auto& t : text) {
    if (!first) line += ',';
    line += t;
    first = false;
  }
  for (double v : values) {
    if (!first) line += ',';
    line += format_number(v);
    first = false;
  }
  rows_.push_back(std::move(line));
}

std::string CsvTable::str() const {
  std::string out;
  for (std::size_t k = 0; k < header_.size(); ++k) {
    if (k) out += ',';
    out += header_[k];
  }
  out += '\n';
  for (const auto& r : rows_) {
    out += r;
    out += '\n';
  }
  return out;
}

void CsvTable::write(const std::filesystem::path& path) const { write_file_atomic(path, str()); }

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw ValidationError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw ValidationError("cannot rename " + tmp.string() + " to " + path.string() + ": " +
                          ec.message());
  }
}

}  // namespace memsim
