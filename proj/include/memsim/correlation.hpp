#pragma once

#include <vector>

#include "memsim/linalg.hpp"
#include "memsim/series.hpp"
#include "memsim/unitary_decomp.hpp"

namespace memsim {

/// Adjoint under the bilinear trace pairing: Tr[A S(X)] = Tr[S*(A) X].
/// Liouville matrix P S^T P with P the vec-transpose permutation.
Superoperator dual_map(const Superoperator& s);

void require_unitary(const ComplexMatrix& u, std::string_view what, double tol = 1e-10);

struct CorrelationValue {
  Complex value;
  Complex plus;   // C+ branch contribution
  Complex minus;  // C- branch contribution (0 when absent)
};

/// C+ Tr[V Lambda+(W rho0)] + C- Tr[V Lambda-(W rho0)].
CorrelationValue two_time_direct(const SplitChannel& split, const ComplexMatrix& v,
                                 const ComplexMatrix& w, const DensityMatrix& rho0);
CorrelationValue two_time_direct(const SplitChannel& split, const ComplexMatrix& u,
                                 const DensityMatrix& rho0);

/// Heisenberg-picture route: C+- Tr[Lambda+-*(V) W rho0].
CorrelationValue two_time_dual(const SplitChannel& split, const ComplexMatrix& v,
                               const ComplexMatrix& w, const DensityMatrix& rho0);

/// Ancilla protocol on C^2 (x) C^d: |+><+| (x) rho0, controlled-W, Lambda on the
/// system, controlled-V, readout <sigma_x> - i <sigma_y> on the ancilla.
CorrelationValue two_time_ancilla(const SplitChannel& split, const ComplexMatrix& v,
                                  const ComplexMatrix& w, const DensityMatrix& rho0);
CorrelationValue two_time_ancilla(const SplitChannel& split, const ComplexMatrix& u,
                                  const DensityMatrix& rho0);

/// Tr[U_N Lambda_{N-1}(U_{N-1} ... Lambda_1(U_1 rho0))], where Lambda_j is the
/// split propagator over [t_j, t_{j+1}], summed over all branch tuples.
Complex multi_time(const std::vector<double>& times, const std::vector<SplitChannel>& intervals,
                   const std::vector<ComplexMatrix>& unitaries, const DensityMatrix& rho0);
Complex multi_time_ancilla(const std::vector<double>& times,
                           const std::vector<SplitChannel>& intervals,
                           const std::vector<ComplexMatrix>& unitaries,
                           const DensityMatrix& rho0);

enum class CorrelationMethod { direct, ancilla };

/// Tr[O Lambda(O rho0)] for Hermitian O through its two-unitary decomposition.
Complex observable_correlation(const ComplexMatrix& o, const SplitChannel& split,
                               const DensityMatrix& rho0,
                               CorrelationMethod method = CorrelationMethod::direct);

}  // namespace memsim
