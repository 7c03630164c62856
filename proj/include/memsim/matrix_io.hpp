#pragma once

#include <filesystem>
#include <string_view>

#include "json.hpp"
#include "memsim/linalg.hpp"

namespace memsim {

/// Rows of [re, im] pairs: [[[re, im], [re, im]], [[re, im], [re, im]]].
nlohmann::json matrix_to_json(const ComplexMatrix& m);

/// Accepts [re, im] pairs or bare real numbers per entry. `field` names
/// the config location in error messages.
ComplexMatrix matrix_from_json(const nlohmann::json& j, std::string_view field);

ComplexMatrix load_matrix_file(const std::filesystem::path& path);

}  // namespace memsim
