#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "memsim/kernel.hpp"
#include "memsim/linalg.hpp"

namespace memsim {

enum class EquationTag { nonmark, semimark, order2, inhomogeneous };

const char* to_string(EquationTag e);

/// States of a reference integration on a uniform grid. states[0] is the
/// initial condition; later states may be non-positive quasi-states.
struct Trajectory {
  TimeGrid grid;
  std::vector<ComplexMatrix> states;
  EquationTag equation = EquationTag::nonmark;
  /// Expected Tr states[j]: 1, or 1 + t_j Tr sigma for the inhomogeneous form.
  std::vector<Complex> expected_trace;

  const ComplexMatrix& final() const { return states.back(); }
  double max_trace_error() const;
};

/// Implicit-trapezoid integration of rho(t) = rho0 + int_0^t k(t,s) L rho(s) ds.
Trajectory oracle_nonmark(const MemoryKernel& kernel, const Superoperator& L,
                          const DensityMatrix& rho0, const TimeGrid& grid);

/// Same with L -> E - I and k -> h.
Trajectory oracle_semimark(const MemoryKernel& kernel, const Superoperator& e,
                           const DensityMatrix& rho0, const TimeGrid& grid);
/// Variant taking a precomputed (possibly rescaled) table h.
Trajectory oracle_semimark(const KernelIntegrals& h, const Superoperator& e,
                           const DensityMatrix& rho0);

/// d rho/dt = int_0^t ds1 int_0^s1 ds2 K(s1,s2) L rho(s2), stepped with two
/// nested trapezoid histories.
Trajectory oracle_order2(const MemoryKernel& kernel, const Superoperator& L,
                         const DensityMatrix& rho0, const TimeGrid& grid);

/// rho(t) = rho0 + t sigma + int_0^t k(t,s) L rho(s) ds.
Trajectory oracle_inhomogeneous(const MemoryKernel& kernel, const Superoperator& L,
                                const ComplexMatrix& sigma, const DensityMatrix& rho0,
                                const TimeGrid& grid);

/// exp(y int_0^t h(t,s) ds) with the row integral taken at the node of t.
double gronwall_bound(const KernelIntegrals& h, double y, double t);

struct Comparison {
  std::vector<double> distances;  // trace norm per node
  double max = 0.0;
};

Comparison compare(const Trajectory& a, const Trajectory& b);

/// CSV: t, re/im of every vectorized entry, trace, min eigenvalue.
void write_trajectory_csv(const Trajectory& tr, const std::filesystem::path& path);

}  // namespace memsim
