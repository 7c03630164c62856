#include "memsim/volterra.hpp"

#include <cmath>
#include <map>
#include <optional>
#include <sstream>

#include <Eigen/LU>

#include "memsim/csv.hpp"

namespace memsim {

const char* to_string(EquationTag e) {
  switch (e) {
    case EquationTag::nonmark: return "nonmark";
    case EquationTag::semimark: return "semimark";
    case EquationTag::order2: return "order2";
    case EquationTag::inhomogeneous: return "inhomogeneous";
  }
  return "unknown";
}

double Trajectory::max_trace_error() const {
  double worst = 0.0;
  for (std::size_t j = 0; j < states.size(); ++j) {
    worst = std::max(worst, std::abs(states[j].trace() - expected_trace[j]));
  }
  return worst;
}

namespace {

/// Cache of factorizations of I - a G keyed by a.
class ImplicitSolver {
 public:
  explicit ImplicitSolver(const ComplexMatrix& g) : g_(g) {}

  ComplexVector solve(double a, const ComplexVector& rhs, std::size_t step, double dt) {
    auto it = cache_.find(a);
    if (it == cache_.end()) {
      const auto n = g_.rows();
      Eigen::PartialPivLU<ComplexMatrix> lu(ComplexMatrix::Identity(n, n) - a * g_);
      // rcond() misses exact zero pivots
      const Eigen::VectorXd piv = lu.matrixLU().diagonal().cwiseAbs();
      const double pivot_ratio = piv.minCoeff() / piv.maxCoeff();
      if (!(lu.rcond() > 1e-12) || !(pivot_ratio > 1e-14)) {
        std::ostringstream os;
        os << "implicit step " << step << " is singular (rcond " << lu.rcond()
           << "); reduce dt = " << dt;
        throw NumericError(os.str());
      }
      it = cache_.emplace(a, std::move(lu)).first;
    }
    return it->second.solve(rhs);
  }

 private:
  const ComplexMatrix& g_;
  std::map<double, Eigen::PartialPivLU<ComplexMatrix>> cache_;
};

void require_inputs(const Superoperator& g, const DensityMatrix& rho0) {
  if (g.dim() != rho0.dim()) throw ValidationError("oracle: generator and rho0 dimensions differ");
}

/// rho_j = rho0 + t_j sigma + sum_m w_jm k(t_j,t_m) G rho_m, trapezoid weights,
/// diagonal term solved implicitly.
Trajectory step_volterra(const KernelIntegrals& k, const ComplexMatrix& g,
                         const DensityMatrix& rho0, const ComplexMatrix* sigma, EquationTag tag) {
  const TimeGrid& grid = k.grid();
  const std::size_t n = grid.size();
  const double dt = grid.dt();
  const int d = rho0.dim();
  const ComplexVector v0 = vectorize(rho0.matrix());
  const ComplexVector sv = sigma ? vectorize(*sigma) : ComplexVector::Zero(v0.size());
  const Complex tr_sigma = sigma ? sigma->trace() : Complex(0.0);

  ImplicitSolver solver(g);
  std::vector<ComplexVector> g_hist;
  g_hist.reserve(n);
  Trajectory out{grid, {}, tag, {}};
  out.states.reserve(n);
  out.states.push_back(rho0.matrix());
  out.expected_trace.push_back(1.0);
  g_hist.push_back(g * v0);

  for (std::size_t j = 1; j < n; ++j) {
    ComplexVector rhs = v0 + grid.time(j) * sv;
    rhs += 0.5 * dt * k(j, 0) * g_hist[0];
    for (std::size_t m = 1; m < j; ++m) rhs += dt * k(j, m) * g_hist[m];
    const ComplexVector x = solver.solve(0.5 * dt * k(j, j), rhs, j, dt);
    g_hist.push_back(g * x);
    out.states.push_back(unvectorize(x, d));
    out.expected_trace.push_back(1.0 + grid.time(j) * tr_sigma);
  }
  return out;
}

}  // namespace

Trajectory oracle_nonmark(const MemoryKernel& kernel, const Superoperator& L,
                          const DensityMatrix& rho0, const TimeGrid& grid) {
  require_inputs(L, rho0);
  return step_volterra(integrate_kernel(kernel, grid), L.liouville(), rho0, nullptr,
                       EquationTag::nonmark);
}

Trajectory oracle_semimark(const MemoryKernel& kernel, const Superoperator& e,
                           const DensityMatrix& rho0, const TimeGrid& grid) {
  return oracle_semimark(integrate_kernel(kernel, grid), e, rho0);
}

Trajectory oracle_semimark(const KernelIntegrals& h, const Superoperator& e,
                           const DensityMatrix& rho0) {
  require_inputs(e, rho0);
  const Superoperator g = e - Superoperator::identity(e.dim());
  return step_volterra(h, g.liouville(), rho0, nullptr, EquationTag::semimark);
}

Trajectory oracle_inhomogeneous(const MemoryKernel& kernel, const Superoperator& L,
                                const ComplexMatrix& sigma, const DensityMatrix& rho0,
                                const TimeGrid& grid) {
  require_inputs(L, rho0);
  require_square_finite(sigma, "sigma");
  if (sigma.rows() != rho0.dim()) throw ValidationError("oracle: sigma dimension mismatch");
  return step_volterra(integrate_kernel(kernel, grid), L.liouville(), rho0, &sigma,
                       EquationTag::inhomogeneous);
}

Trajectory oracle_order2(const MemoryKernel& kernel, const Superoperator& L,
                         const DensityMatrix& rho0, const TimeGrid& grid) {
  require_inputs(L, rho0);
  const std::size_t n = grid.size();
  const double dt = grid.dt();
  const double half = 0.5 * dt;
  const int d = rho0.dim();
  const ComplexMatrix& g = L.liouville();
  const bool delta = kernel.is_delta();

  // kt[j][m] = K(t_j, t_m) for m <= j
  std::vector<std::vector<double>> kt;
  if (!delta) {
    kt.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      kt[j].resize(j + 1);
      for (std::size_t m = 0; m <= j; ++m) {
        const double v = kernel(grid.time(j), grid.time(m));
        if (!std::isfinite(v)) {
          std::ostringstream os;
          os << "kernel " << kernel.describe() << " is not finite at t=" << grid.time(j)
             << ", s=" << grid.time(m);
          throw NumericError(os.str());
        }
        kt[j][m] = v;
      }
    }
  }

  ImplicitSolver solver(g);
  const ComplexVector v0 = vectorize(rho0.matrix());
  std::vector<ComplexVector> g_hist{g * v0};
  // F(s1) = int_0^s1 K(s1, s2) L rho(s2) ds2 ; Phi(t') = int_0^t' F
  ComplexVector f_prev = delta ? g_hist[0] : ComplexVector::Zero(v0.size());
  ComplexVector phi_prev = ComplexVector::Zero(v0.size());
  ComplexVector rho_prev = v0;

  Trajectory out{grid, {rho0.matrix()}, EquationTag::order2, {1.0}};
  for (std::size_t j = 1; j < n; ++j) {
    ComplexVector f_known = ComplexVector::Zero(v0.size());
    double c_f = 1.0;
    if (!delta) {
      f_known += half * kt[j][0] * g_hist[0];
      for (std::size_t m = 1; m < j; ++m) f_known += dt * kt[j][m] * g_hist[m];
      c_f = half * kt[j][j];
    }
    const ComplexVector phi_known = phi_prev + half * (f_prev + f_known);
    const ComplexVector rhs = rho_prev + half * (phi_prev + phi_known);
    const ComplexVector x = solver.solve(half * half * c_f, rhs, j, dt);
    const ComplexVector gx = g * x;
    const ComplexVector f = f_known + c_f * gx;
    const ComplexVector phi = phi_known + half * c_f * gx;
    g_hist.push_back(gx);
    f_prev = f;
    phi_prev = phi;
    rho_prev = x;
    out.states.push_back(unvectorize(x, d));
    out.expected_trace.push_back(1.0);
  }
  return out;
}

double gronwall_bound(const KernelIntegrals& h, double y, double t) {
  return std::exp(y * h.row_integral(h.grid().node_of(t)));
}

Comparison compare(const Trajectory& a, const Trajectory& b) {
  if (!(a.grid == b.grid) || a.states.size() != b.states.size()) {
    throw ValidationError("compare: trajectories live on different grids");
  }
  Comparison c;
  c.distances.reserve(a.states.size());
  for (std::size_t j = 0; j < a.states.size(); ++j) {
    if (a.states[j].rows() != b.states[j].rows()) {
      throw ValidationError("compare: state dimensions differ");
    }
    c.distances.push_back(trace_norm(a.states[j] - b.states[j]));
    c.max = std::max(c.max, c.distances.back());
  }
  return c;
}

void write_trajectory_csv(const Trajectory& tr, const std::filesystem::path& path) {
  if (tr.states.empty()) throw ValidationError("trajectory is empty");
  const auto n = tr.states.front().size();
  std::vector<std::string> header{"t"};
  for (Eigen::Index k = 0; k < n; ++k) {
    header.push_back("re" + std::to_string(k));
    header.push_back("im" + std::to_string(k));
  }
  header.insert(header.end(), {"trace_re", "trace_im", "min_eig"});
  CsvTable table(header);
  for (std::size_t j = 0; j < tr.states.size(); ++j) {
    const ComplexVector v = vectorize(tr.states[j]);
    std::vector<double> row{tr.grid.time(j)};
    for (Eigen::Index k = 0; k < n; ++k) {
      row.push_back(v(k).real());
      row.push_back(v(k).imag());
    }
    const Complex tr_j = tr.states[j].trace();
    row.insert(row.end(), {tr_j.real(), tr_j.imag(), min_eigenvalue(tr.states[j])});
    table.add_row(row);
  }
  table.write(path);
}

}  // namespace memsim
