#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "memsim/kernel.hpp"
#include "memsim/linalg.hpp"
#include "memsim/wide_real.hpp"

namespace memsim {

// ---------------------------------------------------------------------------
// Truncation order

/// Smallest M >= 0 with M >= (e+1) c y t + ln(1/epsilon) - 1.
int truncation_order(double c, double y, double t, double epsilon);

/// Composition variant M >= (e+1) c y t + ln(1/epsilon), used when the
/// truncation error has to fit into half of a composed error budget.
int truncation_order_composition(double c, double y, double t, double epsilon);

/// sum_{i > order} x^i / i!, the tail that the truncation order controls.
double exponential_tail(double x, int order);

struct TruncationBudget {
  double epsilon;
  double a_rate;  // (e+1) c ||E - I||
  int order_M;

  /// Throws ValidationError if order_M < a_rate t + ln(1/epsilon) - 1.
  TruncationBudget(double epsilon, double a_rate, int order_M, double t);
};

// ---------------------------------------------------------------------------
// Coefficients and splitting

/// Coefficients of the truncated series at one time node. d holds the
/// scaled d_i (d_i = scale^i d_raw_i); c_i = sum_k binom(k,i) (-1)^(k-i) d_k.
struct SeriesCoefficients {
  double t = 0.0;
  std::size_t node = 0;
  double scale = 1.0;
  std::vector<double> d_raw;
  std::vector<WideReal> d, c, c_plus, c_minus;
  WideReal C_plus = 0, C_minus = 0;

  int order() const { return static_cast<int>(d.size()) - 1; }
  bool has_minus() const { return C_minus != 0; }
};

/// Coefficient entries in (-zero_snap, 0) are treated as rounding noise
/// and set to zero before splitting.
inline constexpr double kZeroSnap = 1e-14;

SeriesCoefficients binomial_transform(std::span<const double> d, double zero_snap = kZeroSnap);
SeriesCoefficients binomial_transform(const NestedCoefficients& d, std::size_t node,
                                      double zero_snap = kZeroSnap);

enum class Branch { plus, minus };

/// The two CPTP maps Lambda+- = (1/C+-) sum_i c+-_i E^i with their weights.
struct SplitChannel {
  Superoperator channel;
  std::vector<double> plus_weights;   // c+_i / C+, a probability vector
  std::vector<double> minus_weights;  // c-_i / C-, empty when C- = 0
  WideReal C_plus = 1, C_minus = 0;

  bool has_minus() const { return !minus_weights.empty(); }
  ComplexMatrix apply_branch(Branch b, const ComplexMatrix& x) const;
  Superoperator branch_map(Branch b) const;
  /// C+ Lambda+ + C- Lambda-.
  Superoperator combined_map() const;

  static SplitChannel identity(int dim);
};

SplitChannel make_split_channel(const SeriesCoefficients& series, const Superoperator& e);

struct SplitDiagnostics {
  double trace_error = 0.0;           // |Tr rho~ - expected trace|
  double weight_sum_error = 0.0;      // |C+ + C- - 1|, working precision
  double split_residual = 0.0;        // max |rho~ - C+ rho+ - C- rho-|, working precision
  double representation_residual = 0.0;  // ||sum c_i E^i rho0 - sum d_i (E-I)^i rho0||_1
  double min_eig_plus = 0.0;
  double min_eig_minus = 0.0;
  double trace_norm = 0.0;            // ||rho~||_1
  double gronwall_bound = std::numeric_limits<double>::infinity();  // exp(y int_0^t h ds); unset: inf
  double split_conditioning = 1.0;    // C+ + |C-|
};

struct SplitSolution {
  double t = 0.0;
  std::size_t node = 0;
  ComplexMatrix rho_tilde;
  ComplexMatrix rho_plus;
  std::optional<ComplexMatrix> rho_minus;  // absent when every c_i >= 0
  std::optional<ComplexMatrix> source;     // inhomogeneous contribution, if any
  double C_plus = 1.0;
  double C_minus = 0.0;
  double expected_trace = 1.0;
  SplitDiagnostics diagnostics;

  bool has_minus() const { return rho_minus.has_value(); }
};

/// Violations of the structural invariants (empty when all hold):
/// trace law, C+ + C- = 1, split identity, PSD branches, Groenwall bound.
std::vector<std::string> check_invariants(const SplitSolution& s, double tol = 1e-10);

/// Holds E^i rho0 in working precision for i <= max_order and assembles
/// split solutions from coefficient sets. Immutable after construction.
class SplitAssembler {
 public:
  SplitAssembler(const Superoperator& e, const DensityMatrix& rho0, int max_order,
                 double scale = 1.0, const ComplexMatrix* source = nullptr);
  ~SplitAssembler();
  SplitAssembler(SplitAssembler&&) noexcept;

  SplitSolution assemble(const SeriesCoefficients& series,
                         const SeriesCoefficients* source_series = nullptr) const;

  /// max-entry residual of sum c_i E^i - sum d_i (E - I)^i as Liouville
  /// matrices (all basis columns for d <= 3, else rho0 plus two probes).
  double operator_identity_residual(const SeriesCoefficients& series) const;

  const Superoperator& channel() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

SplitSolution assemble(const SeriesCoefficients& series, const Superoperator& e,
                       const DensityMatrix& rho0);

// ---------------------------------------------------------------------------
// Pipeline

struct SeriesOptions {
  double epsilon = 1e-6;
  bool composition_form = false;
  std::optional<int> order_override;
  std::vector<std::size_t> output_nodes;  // empty: final node only
  double zero_snap = kZeroSnap;
  int norm_samples = 32;
  std::uint64_t seed = 0;
};

struct SeriesReport {
  double t = 0.0;
  double epsilon = 0.0;
  double c_bound = 0.0;
  double y_upper = 0.0;    // induced_norm_upper(E - I)
  double y_sampled = 0.0;  // sampled_norm_lower(E - I)
  double a_rate = 0.0;
  int order_standalone = 0;
  int order_composition = 0;
  int order_used = 0;
  bool composition_form = false;
  double truncation_bound = 0.0;  // exponential_tail(c y t, order_used)
  std::optional<double> quadrature_estimate;
  double gronwall_bound = 0.0;
  bool kernel_nonnegative = true;
  double operator_identity_residual = 0.0;
  double split_conditioning = 1.0;
};

struct SeriesRun {
  SeriesReport report;
  Superoperator channel;
  NestedCoefficients coefficients;
  std::optional<NestedCoefficients> source_coefficients;
  std::vector<SplitSolution> solutions;

  const SplitSolution& final() const { return solutions.back(); }
  SplitChannel split_channel(std::size_t node, double zero_snap = kZeroSnap) const;
};

/// Truncated series solution of rho(t) = rho0 [+ t sigma] + int h (E - I) rho.
/// `refined`, when given, is the same kernel on grid.refined() and yields
/// a Richardson estimate of the quadrature error at the final node.
SeriesRun solve_series(const KernelIntegrals& h, const Superoperator& e,
                       const DensityMatrix& rho0, const SeriesOptions& options,
                       const ComplexMatrix* source = nullptr,
                       const KernelIntegrals* refined = nullptr);

struct SemiMarkovOptions {
  std::size_t n_points = 1001;
  bool estimate_quadrature = true;
  SeriesOptions series;
};

/// integrate_kernel -> bound c -> truncation order -> nested coefficients
/// -> binomial transform -> assemble, on the grid [0, t].
SeriesRun semimarkov_solve(const MemoryKernel& kernel, const Superoperator& e,
                           const DensityMatrix& rho0, double t, double epsilon,
                           const SemiMarkovOptions& options = {});

// ---------------------------------------------------------------------------
// Error composition with an imperfect channel

struct ErrorBudget {
  double total = 0.0;
  double delta_plus_target = 0.0;   // eps~ / (4 |C+|)
  double delta_minus_target = 0.0;  // eps~ / (4 |C-|), +inf when C- = 0
};

/// eps~/2 + C+ delta + |C-| delta with C- = 1 - C+.
ErrorBudget compose_error_budget(double delta_per_power, double C_plus, double epsilon_tilde);

/// CPTP channel E o exp(s dL) for a random Lindbladian dL, with s chosen by
/// bisection so that delta/2 <= induced_norm_upper(result - E) <= delta.
Superoperator perturb_channel(const Superoperator& e, double delta, std::uint64_t seed);

struct PowerPerturbation {
  Superoperator channel;
  double max_power_deviation = 0.0;  // max_{i<=max_power} induced_norm_upper(E~^i - E^i)
};

/// Shrinks the perturbation until every power up to max_power stays within delta.
PowerPerturbation perturb_channel_powers(const Superoperator& e, double delta, int max_power,
                                         std::uint64_t seed);

}  // namespace memsim
