#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "memsim/kernel.hpp"
#include "memsim/linalg.hpp"

namespace memsim {

/// Malformed or inconsistent configuration; the message names the field
/// (and the line for syntax errors).
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

enum class Equation { semimarkov, nonmarkov, order2, inhomogeneous };

const char* to_string(Equation e);

struct KernelConfig {
  KernelFamily family = KernelFamily::constant;
  std::vector<double> params;
  std::filesystem::path file;  // tabulated only

  MemoryKernel build() const;
  nlohmann::json to_json() const;
};

struct CorrelationConfig {
  std::vector<ComplexMatrix> unitaries;
  std::vector<double> times;
  std::optional<ComplexMatrix> observable;
};

struct ConvergenceConfig {
  int levels = 4;
  std::string quantity = "all";  // oracle_markov | nested_d2 | nested_d3 | zero | all
};

/// schema_version 1. Matrices are nested arrays of numbers or [re, im] pairs.
struct RunConfig {
  int schema_version = 1;
  LindbladSpec system;
  ComplexMatrix initial_state;
  KernelConfig kernel;
  Equation equation = Equation::semimarkov;
  double channel_lambda = 1.0;  // semimarkov: E = exp(channel_lambda L)
  std::optional<ComplexMatrix> sigma;
  double t_max = 1.0;
  std::size_t n_points = 201;
  double epsilon = 1e-6;
  double epsilon_split = 0.5;
  std::optional<double> lambda_override;
  bool composition_form = false;
  std::size_t output_every = 0;  // 0: final node only
  std::uint64_t seed = 0;
  double tolerance = 1e-6;
  CorrelationConfig correlation;
  std::optional<ComplexMatrix> observable;
  std::optional<double> gamma;
  ConvergenceConfig convergence;

  int dim() const { return system.dim(); }
  TimeGrid grid() const { return TimeGrid(t_max, n_points); }
  DensityMatrix rho0() const { return DensityMatrix(initial_state); }
  /// Output node indices: every output_every-th node plus the last.
  std::vector<std::size_t> output_nodes() const;

  nlohmann::json to_json() const;
};

RunConfig parse_config(const std::string& text,
                       const std::filesystem::path& base_dir = std::filesystem::path("."));
RunConfig load_config(const std::filesystem::path& path);

}  // namespace memsim
