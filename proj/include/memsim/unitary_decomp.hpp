#pragma once

#include <vector>

#include "memsim/linalg.hpp"

namespace memsim {

/// Raised when gamma or an eigenvalue falls outside the admissible domain.
class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

struct GammaRange {
  double lo = 0.0;  // max_i |d_i - 1|
  double hi = 0.0;  // 1 + min_i d_i

  bool empty() const { return lo > hi; }
  double midpoint() const { return 0.5 * (lo + hi); }
};

GammaRange gamma_range(const std::vector<double>& eigenvalues);

struct NormalizedObservable {
  ComplexMatrix matrix;  // O' = (O + alpha I) / beta, spectrum in [1/2, 1]
  double alpha = 0.0;
  double beta = 1.0;
};

NormalizedObservable normalize_observable(const ComplexMatrix& o);

struct UnitaryPair {
  ComplexMatrix u_a, u_b;
  double gamma = 1.0;
  double shift_alpha = 0.0;
  double scale_beta = 1.0;
};

/// Per-eigenvalue parameters of a_i + gamma b_i = d_i with |a_i| = |b_i| = 1.
struct EigenPair {
  Complex a, b;
};
EigenPair decompose_eigenvalue(double d, double gamma);

/// O' = u_a + gamma u_b for Hermitian O' with positive spectrum.
UnitaryPair decompose(const ComplexMatrix& o_prime, double gamma);

/// Normalize, pick the midpoint gamma, decompose; the pair records alpha, beta.
UnitaryPair decompose_observable(const ComplexMatrix& o);

/// beta (Tr[u_a rho] + gamma Tr[u_b rho]) - alpha.
double expectation_via_pair(const UnitaryPair& pair, const DensityMatrix& rho);

}  // namespace memsim
