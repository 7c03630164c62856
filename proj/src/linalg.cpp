#include "memsim/linalg.hpp"

#include <cmath>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "memsim/random.hpp"

namespace memsim {

ComplexVector vectorize(const ComplexMatrix& m) {
  return Eigen::Map<const ComplexVector>(m.data(), m.size());
}

ComplexMatrix unvectorize(const ComplexVector& v, int dim) {
  if (static_cast<Eigen::Index>(dim) * dim != v.size()) {
    throw ValidationError("unvectorize: vector length " + std::to_string(v.size()) +
                          " is not " + std::to_string(dim) + "^2");
  }
  return Eigen::Map<const ComplexMatrix>(v.data(), dim, dim);
}

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

void require_square_finite(const ComplexMatrix& m, std::string_view what) {
  if (m.rows() < 1 || m.rows() != m.cols()) {
    std::ostringstream os;
    os << what << ": expected a non-empty square matrix, got " << m.rows() << "x" << m.cols();
    throw ValidationError(os.str());
  }
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    const Complex z = m.data()[k];
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
      throw ValidationError(std::string(what) + ": non-finite entry");
    }
  }
}

bool is_hermitian(const ComplexMatrix& m, double tol) {
  return m.rows() == m.cols() && max_abs(m - m.adjoint()) <= tol;
}

double max_abs(const ComplexMatrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

double min_eigenvalue(const ComplexMatrix& m) {
  const ComplexMatrix herm = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(herm, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

QuasiState::QuasiState(ComplexMatrix m) : m_(std::move(m)) {
  require_square_finite(m_, "quasi-state");
  if (!is_hermitian(m_, 1e-12)) {
    throw ValidationError("quasi-state: matrix is not Hermitian (tol 1e-12)");
  }
  if (std::abs(m_.trace() - Complex(1.0)) > 1e-10) {
    throw ValidationError("quasi-state: trace differs from 1 by more than 1e-10");
  }
}

DensityMatrix::DensityMatrix(ComplexMatrix m) : QuasiState(std::move(m)) {
  if (min_eigenvalue(m_) < -1e-10) {
    throw ValidationError("density matrix: negative eigenvalue below -1e-10");
  }
}

DensityMatrix DensityMatrix::maximally_mixed(int dim) {
  return DensityMatrix(ComplexMatrix::Identity(dim, dim) / static_cast<double>(dim));
}

DensityMatrix DensityMatrix::pure(const ComplexVector& psi) {
  const ComplexVector u = psi / psi.norm();
  return DensityMatrix(u * u.adjoint());
}

Superoperator::Superoperator(int dim, ComplexMatrix liouville)
    : dim_(dim), liouville_(std::move(liouville)) {
  if (dim < 1) throw ValidationError("superoperator: dimension must be >= 1");
  const Eigen::Index n = static_cast<Eigen::Index>(dim) * dim;
  if (liouville_.rows() != n || liouville_.cols() != n) {
    throw ValidationError("superoperator: Liouville matrix must be d^2 x d^2");
  }
}

Superoperator Superoperator::identity(int dim) {
  const Eigen::Index n = static_cast<Eigen::Index>(dim) * dim;
  return Superoperator(dim, ComplexMatrix::Identity(n, n));
}

Superoperator Superoperator::zero(int dim) {
  const Eigen::Index n = static_cast<Eigen::Index>(dim) * dim;
  return Superoperator(dim, ComplexMatrix::Zero(n, n));
}

Superoperator Superoperator::conjugation(const ComplexMatrix& v) {
  require_square_finite(v, "conjugation");
  return Superoperator(static_cast<int>(v.rows()), kron(v.conjugate(), v));
}

ComplexMatrix Superoperator::apply(const ComplexMatrix& m) const {
  if (m.rows() != dim_ || m.cols() != dim_) {
    throw ValidationError("superoperator apply: input dimension mismatch");
  }
  return unvectorize(liouville_ * vectorize(m), dim_);
}

void Superoperator::check_same_dim(const Superoperator& o) const {
  if (o.dim_ != dim_) throw ValidationError("superoperator: dimension mismatch");
}

Superoperator Superoperator::operator+(const Superoperator& o) const {
  check_same_dim(o);
  return Superoperator(dim_, liouville_ + o.liouville_);
}

Superoperator Superoperator::operator-(const Superoperator& o) const {
  check_same_dim(o);
  return Superoperator(dim_, liouville_ - o.liouville_);
}

Superoperator Superoperator::operator*(double s) const {
  return Superoperator(dim_, liouville_ * s);
}

Superoperator Superoperator::operator*(const Superoperator& o) const {
  check_same_dim(o);
  return Superoperator(dim_, liouville_ * o.liouville_);
}

void LindbladSpec::validate() const {
  require_square_finite(hamiltonian, "hamiltonian");
  if (!is_hermitian(hamiltonian, 1e-12)) {
    throw ValidationError("hamiltonian: not Hermitian (tol 1e-12)");
  }
  for (std::size_t k = 0; k < jumps.size(); ++k) {
    const auto& j = jumps[k];
    const std::string name = "jump operator " + std::to_string(k);
    require_square_finite(j.op, name);
    if (j.op.rows() != hamiltonian.rows()) {
      throw ValidationError(name + ": dimension differs from the hamiltonian");
    }
    if (!(j.rate >= 0.0) || !std::isfinite(j.rate)) {
      throw ValidationError(name + ": rate must be a finite nonnegative number");
    }
  }
}

Superoperator build_lindblad(const LindbladSpec& spec) {
  spec.validate();
  const int d = spec.dim();
  const ComplexMatrix id = ComplexMatrix::Identity(d, d);
  const Complex i(0.0, 1.0);
  // vec(H X) = (I kron H) vec X ; vec(X H) = (H^T kron I) vec X
  ComplexMatrix l = -i * (kron(id, spec.hamiltonian) - kron(spec.hamiltonian.transpose(), id));
  for (const auto& j : spec.jumps) {
    if (j.rate == 0.0) continue;
    const ComplexMatrix ldl = j.op.adjoint() * j.op;
    l += j.rate * (kron(j.op.conjugate(), j.op) - 0.5 * kron(id, ldl) -
                   0.5 * kron(ldl.transpose(), id));
  }
  return Superoperator(d, std::move(l));
}

Superoperator channel_exp(const Superoperator& generator, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ValidationError("channel_exp: lambda must be a finite nonnegative number");
  }
  if (lambda == 0.0) return Superoperator::identity(generator.dim());
  const ComplexMatrix scaled = generator.liouville() * lambda;
  return Superoperator(generator.dim(), scaled.exp());
}

Superoperator channel_power(const Superoperator& e, int power) {
  if (power < 0) throw ValidationError("channel_power: power must be >= 0");
  Superoperator result = Superoperator::identity(e.dim());
  Superoperator base = e;
  for (int p = power; p > 0; p >>= 1) {
    if (p & 1) result = result * base;
    if (p > 1) base = base * base;
  }
  return result;
}

ChannelPowers::ChannelPowers(Superoperator e) : base_(std::move(e)) {
  cache_.push_back(Superoperator::identity(base_.dim()));
}

Superoperator ChannelPowers::power(int i) const {
  if (i < 0) throw ValidationError("channel_power: power must be >= 0");
  std::lock_guard lock(mutex_);
  while (static_cast<int>(cache_.size()) <= i) {
    cache_.push_back(base_ * cache_.back());
  }
  return cache_[static_cast<std::size_t>(i)];
}

double trace_norm(const ComplexMatrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<ComplexMatrix> svd(m);
  return svd.singularValues().sum();
}

double induced_norm_upper(const Superoperator& s) {
  Eigen::JacobiSVD<ComplexMatrix> svd(s.liouville());
  return std::sqrt(static_cast<double>(s.dim())) * svd.singularValues()(0);
}

double sampled_norm_lower(const Superoperator& s, int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw ValidationError("sampled_norm_lower: n_samples must be >= 1");
  Rng rng(seed);
  double best = 0.0;
  for (int k = 0; k < n_samples; ++k) {
    const ComplexVector u = random_unit_vector(s.dim(), rng);
    const ComplexVector v = random_unit_vector(s.dim(), rng);
    const ComplexMatrix x = u * v.adjoint();
    best = std::max(best, trace_norm(s.apply(x)));
  }
  return best;
}

}  // namespace memsim
