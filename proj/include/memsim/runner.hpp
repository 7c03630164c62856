#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "memsim/config.hpp"

namespace memsim {

enum class Task { simulate, oracle, compare, bound, correlate, decompose, convergence };

const char* to_string(Task t);
std::optional<Task> parse_task(std::string_view name);

struct RunOptions {
  std::filesystem::path output_dir = ".";
  int threads = 1;
  std::optional<std::uint64_t> seed;  // overrides the config seed
};

struct ConvergencePoint {
  std::size_t n_points = 0;
  double dt = 0.0;
  double error = 0.0;
};

struct ConvergenceSeries {
  std::string quantity;
  std::vector<ConvergencePoint> points;
  /// log2(e_l / e_{l+1}); NaN where either error is at machine level.
  std::vector<double> slopes;
  /// Least-squares slope of log2 error against -log2 dt (NaN if saturated).
  double fitted_slope = 0.0;
  bool saturated = false;
};

/// Error below which a level counts as exact.
inline constexpr double kSaturationLevel = 1e-13;

/// Runs the selected quantity on n_l = (n_0 - 1) 2^l + 1 points, l < levels.
/// Quantities: oracle_markov, oracle_semimark, nested_d2, nested_d3, zero, all.
std::vector<ConvergenceSeries> convergence_study(const RunConfig& config, int levels,
                                                 int threads = 1);

/// Executes `task` and writes its artifacts into options.output_dir.
/// Throws ValidationError / NumericError on failure.
void run_task(Task task, const RunConfig& config, const RunOptions& options, std::ostream& log);

/// run_task with exit-code mapping: 0 ok, 1 validation, 2 numeric failure.
int run(Task task, const RunConfig& config, const RunOptions& options, std::ostream& log,
        std::ostream& err);

}  // namespace memsim
