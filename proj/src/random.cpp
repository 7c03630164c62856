#include "memsim/random.hpp"

#include <cmath>

namespace memsim {

namespace {

Complex gaussian_complex(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double re = n(rng);
  const double im = n(rng);
  return {re, im};
}

}  // namespace

ComplexMatrix random_gaussian_matrix(int rows, int cols, Rng& rng) {
  ComplexMatrix m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = gaussian_complex(rng);
  }
  return m;
}

ComplexVector random_unit_vector(int dim, Rng& rng) {
  ComplexVector v = random_gaussian_matrix(dim, 1, rng);
  return v / v.norm();
}

ComplexMatrix random_hermitian(int dim, Rng& rng) {
  const ComplexMatrix g = random_gaussian_matrix(dim, dim, rng);
  return 0.5 * (g + g.adjoint());
}

ComplexMatrix random_unitary(int dim, Rng& rng) {
  const ComplexMatrix g = random_gaussian_matrix(dim, dim, rng);
  Eigen::HouseholderQR<ComplexMatrix> qr(g);
  ComplexMatrix q = qr.householderQ() * ComplexMatrix::Identity(dim, dim);
  const ComplexMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int k = 0; k < dim; ++k) {
    const Complex diag = r(k, k);
    const double mag = std::abs(diag);
    if (mag > 0.0) q.col(k) *= diag / mag;
  }
  return q;
}

DensityMatrix random_density_matrix(int dim, Rng& rng) {
  const ComplexMatrix g = random_gaussian_matrix(dim, dim, rng);
  ComplexMatrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  rho = 0.5 * (rho + rho.adjoint());
  return DensityMatrix(rho);
}

LindbladSpec random_lindblad_spec(int dim, int n_jumps, Rng& rng) {
  std::uniform_real_distribution<double> rate(0.2, 1.2);
  LindbladSpec spec;
  spec.hamiltonian = random_hermitian(dim, rng);
  for (int k = 0; k < n_jumps; ++k) {
    ComplexMatrix op = random_gaussian_matrix(dim, dim, rng);
    op /= op.norm();
    spec.jumps.push_back({op, rate(rng)});
  }
  return spec;
}

}  // namespace memsim
