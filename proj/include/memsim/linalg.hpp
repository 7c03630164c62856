#pragma once

#include <complex>
#include <cstdint>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace memsim {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// Raised when an input violates a documented precondition or invariant.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical procedure cannot deliver its result
/// (singular step, infeasible budget, precision exhausted, ...).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Column-stacking vectorization: vec(A X B) = (B^T kron A) vec(X).
ComplexVector vectorize(const ComplexMatrix& m);
ComplexMatrix unvectorize(const ComplexVector& v, int dim);

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);

void require_square_finite(const ComplexMatrix& m, std::string_view what);
bool is_hermitian(const ComplexMatrix& m, double tol = 1e-12);
double max_abs(const ComplexMatrix& m);
double min_eigenvalue(const ComplexMatrix& m);  // of the Hermitian part

/// Hermitian, unit-trace matrix that may have negative eigenvalues.
class QuasiState {
 public:
  explicit QuasiState(ComplexMatrix m);

  const ComplexMatrix& matrix() const { return m_; }
  int dim() const { return static_cast<int>(m_.rows()); }

 protected:
  ComplexMatrix m_;
};

/// Positive semidefinite quasi-state (eigenvalues >= -1e-10).
class DensityMatrix : public QuasiState {
 public:
  explicit DensityMatrix(ComplexMatrix m);

  static DensityMatrix maximally_mixed(int dim);
  static DensityMatrix pure(const ComplexVector& psi);
};

/// Linear map on d x d matrices, stored as its d^2 x d^2 Liouville matrix
/// acting on column-stacked inputs.
class Superoperator {
 public:
  Superoperator(int dim, ComplexMatrix liouville);

  static Superoperator identity(int dim);
  static Superoperator zero(int dim);
  /// X -> V X V^dagger, Liouville matrix conj(V) kron V.
  static Superoperator conjugation(const ComplexMatrix& v);

  int dim() const { return dim_; }
  const ComplexMatrix& liouville() const { return liouville_; }

  ComplexMatrix apply(const ComplexMatrix& m) const;
  ComplexVector apply(const ComplexVector& v) const { return liouville_ * v; }

  Superoperator operator+(const Superoperator& o) const;
  Superoperator operator-(const Superoperator& o) const;
  Superoperator operator*(double s) const;
  /// Composition: (a * b)(X) = a(b(X)).
  Superoperator operator*(const Superoperator& o) const;

 private:
  void check_same_dim(const Superoperator& o) const;

  int dim_;
  ComplexMatrix liouville_;
};

struct JumpOperator {
  ComplexMatrix op;
  double rate = 0.0;
};

struct LindbladSpec {
  ComplexMatrix hamiltonian;
  std::vector<JumpOperator> jumps;

  int dim() const { return static_cast<int>(hamiltonian.rows()); }
  void validate() const;
};

/// L(rho) = -i[H, rho] + sum_k g_k (L_k rho L_k^dag - 1/2 {L_k^dag L_k, rho}).
Superoperator build_lindblad(const LindbladSpec& spec);

/// exp(lambda L) via scaling-and-squaring Pade on the Liouville matrix.
Superoperator channel_exp(const Superoperator& generator, double lambda);

Superoperator channel_power(const Superoperator& e, int power);

/// Memoized powers E^0, E^1, ... of one channel. Thread-safe.
class ChannelPowers {
 public:
  explicit ChannelPowers(Superoperator e);

  const Superoperator& base() const { return base_; }
  Superoperator power(int i) const;

 private:
  Superoperator base_;
  mutable std::mutex mutex_;
  mutable std::vector<Superoperator> cache_;
};

double trace_norm(const ComplexMatrix& m);

/// sqrt(d) * spectral norm of the Liouville matrix. Never below the
/// trace-norm-induced norm: ||S X||_1 <= sqrt(d) ||S X||_2 <= sqrt(d) ||S|| ||X||_1.
double induced_norm_upper(const Superoperator& s);

/// Largest ||S X||_1 over random rank-one inputs X = u v^dag with ||X||_1 = 1.
double sampled_norm_lower(const Superoperator& s, int n_samples, std::uint64_t seed);

}  // namespace memsim
