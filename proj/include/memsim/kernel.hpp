#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace memsim {

enum class KernelFamily { constant, exponential, gaussian, markov_delta, tabulated };

const char* to_string(KernelFamily f);

/// Samples K(t, s) on a square node set; lookups are bilinear, with
/// entries above the diagonal (s > t) taken from K(t, t).
class TabulatedKernel {
 public:
  TabulatedKernel(std::vector<double> nodes, std::vector<double> values);

  /// CSV with a header row and columns t, s, K covering every s <= t pair.
  static TabulatedKernel load_csv(const std::filesystem::path& path);

  double operator()(double t, double s) const;
  const std::vector<double>& nodes() const { return nodes_; }

 private:
  double at(std::size_t i, std::size_t j) const;

  std::vector<double> nodes_;
  std::vector<double> values_;  // row-major, values_[i * n + j] = K(nodes[i], nodes[j])
};

/// Memory kernel K(t, s) for 0 <= s <= t. The Dirac family 2 delta(t - s)
/// is never evaluated pointwise; only its integral is used.
class MemoryKernel {
 public:
  static MemoryKernel constant(double kappa);
  /// amplitude * exp(-decay (t - s))
  static MemoryKernel exponential(double amplitude, double decay);
  /// amplitude * exp(-((t - s) - center)^2 / (2 width^2))
  static MemoryKernel gaussian(double amplitude, double width, double center);
  static MemoryKernel markov_delta();
  static MemoryKernel tabulated(TabulatedKernel table);

  KernelFamily family() const { return family_; }
  bool is_delta() const { return family_ == KernelFamily::markov_delta; }
  const std::vector<double>& parameters() const { return params_; }
  std::string describe() const;

  double operator()(double t, double s) const;

 private:
  MemoryKernel(KernelFamily f, std::vector<double> params);

  KernelFamily family_;
  std::vector<double> params_;
  std::shared_ptr<const TabulatedKernel> table_;
};

/// Uniform grid t_j = j * dt on [0, t_max].
class TimeGrid {
 public:
  TimeGrid(double t_max, std::size_t n_points);

  double t_max() const { return t_max_; }
  std::size_t size() const { return n_; }
  double dt() const { return t_max_ / static_cast<double>(n_ - 1); }
  double time(std::size_t j) const { return static_cast<double>(j) * dt(); }
  /// Index of the node equal to t (within 1e-9 dt); throws if t is off-grid.
  std::size_t node_of(double t) const;
  /// Same interval, twice the resolution.
  TimeGrid refined() const { return TimeGrid(t_max_, 2 * n_ - 1); }

  bool operator==(const TimeGrid& o) const { return t_max_ == o.t_max_ && n_ == o.n_; }

 private:
  double t_max_;
  std::size_t n_;
};

/// Lower-triangular table k(t_j, t_m) = scale * raw(j, m), m <= j.
class KernelIntegrals {
 public:
  KernelIntegrals(TimeGrid grid, std::vector<double> packed, bool kernel_nonnegative);

  const TimeGrid& grid() const { return grid_; }
  double raw(std::size_t j, std::size_t m) const { return packed_[j * (j + 1) / 2 + m]; }
  double operator()(std::size_t j, std::size_t m) const { return scale_ * raw(j, m); }
  double scale() const { return scale_; }
  /// Grid maximum of the scaled table magnitude.
  double bound_c() const { return scale_ * raw_max_; }
  bool kernel_nonnegative() const { return kernel_nonnegative_; }

  /// Same table multiplied by `factor` (kept as a separate scale so that
  /// quadrature and nested recursion stay in moderate ranges).
  KernelIntegrals scaled(double factor) const;

  /// Trapezoid of the scaled row, int_0^{t_j} k(t_j, s) ds.
  double row_integral(std::size_t j) const;

  /// Largest negative per-column increment (0 when every column is nondecreasing).
  double worst_column_decrease() const;

 private:
  TimeGrid grid_;
  std::vector<double> packed_;
  double scale_ = 1.0;
  double raw_max_ = 0.0;
  bool kernel_nonnegative_ = true;
};

/// d_i(t_j) = scale^i * raw(i, j) for 0 <= i <= order.
class NestedCoefficients {
 public:
  NestedCoefficients(TimeGrid grid, int order, double scale, std::vector<double> values);

  const TimeGrid& grid() const { return grid_; }
  int order() const { return order_; }
  double scale() const { return scale_; }
  double raw(int i, std::size_t j) const {
    return values_[static_cast<std::size_t>(i) * grid_.size() + j];
  }
  /// Scaled value; may overflow to inf when scale is large.
  double operator()(int i, std::size_t j) const;

 private:
  TimeGrid grid_;
  int order_;
  double scale_;
  std::vector<double> values_;
};

KernelIntegrals integrate_kernel(const MemoryKernel& kernel, const TimeGrid& grid);

/// Iterated integrals e_0 = 1, e_i(t) = int_0^t h(t, s) e_{i-1}(s) ds by trapezoid.
NestedCoefficients nested_coefficients(const KernelIntegrals& h, int order);

/// Same recursion started from a caller-supplied e_0(t_j) table.
NestedCoefficients nested_coefficients(const KernelIntegrals& h, int order,
                                       std::span<const double> seed);

}  // namespace memsim
