#pragma once

#include <cstdint>
#include <random>

#include "memsim/linalg.hpp"

namespace memsim {

using Rng = std::mt19937_64;

ComplexVector random_unit_vector(int dim, Rng& rng);
ComplexMatrix random_gaussian_matrix(int rows, int cols, Rng& rng);
ComplexMatrix random_hermitian(int dim, Rng& rng);
/// Haar-distributed unitary (QR of a Ginibre matrix with phase fix).
ComplexMatrix random_unitary(int dim, Rng& rng);
/// Full-rank state from the Hilbert-Schmidt ensemble.
DensityMatrix random_density_matrix(int dim, Rng& rng);
/// Random Hamiltonian plus `n_jumps` random jump operators with rates in [0.2, 1.2].
LindbladSpec random_lindblad_spec(int dim, int n_jumps, Rng& rng);

}  // namespace memsim
