#include "memsim/matrix_io.hpp"

#include <fstream>

namespace memsim {

nlohmann::json matrix_to_json(const ComplexMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      row.push_back({m(i, j).real(), m(i, j).imag()});
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

Complex entry_from_json(const nlohmann::json& e, std::string_view field) {
  if (e.is_number()) return {e.get<double>(), 0.0};
  if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
    return {e[0].get<double>(), e[1].get<double>()};
  }
  throw ValidationError(std::string(field) + ": matrix entries must be numbers or [re, im] pairs");
}

}  // namespace

ComplexMatrix matrix_from_json(const nlohmann::json& j, std::string_view field) {
  if (!j.is_array() || j.empty()) {
    throw ValidationError(std::string(field) + ": expected a non-empty array of rows");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = -1;
  ComplexMatrix m;
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array()) {
      throw ValidationError(std::string(field) + ": row " + std::to_string(i) + " is not an array");
    }
    if (cols < 0) {
      cols = static_cast<Eigen::Index>(row.size());
      m.resize(rows, cols);
    } else if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw ValidationError(std::string(field) + ": ragged rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(i, c) = entry_from_json(row[static_cast<std::size_t>(c)], field);
    }
  }
  require_square_finite(m, field);
  return m;
}

ComplexMatrix load_matrix_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open matrix file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("matrix file " + path.string() + ": " + e.what());
  }
  if (j.is_object() && j.contains("matrix")) return matrix_from_json(j["matrix"], path.string());
  return matrix_from_json(j, path.string());
}

}  // namespace memsim
