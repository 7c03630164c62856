#include "memsim/correlation.hpp"

#include <cmath>
#include <sstream>

namespace memsim {

Superoperator dual_map(const Superoperator& s) {
  const int d = s.dim();
  const int n = d * d;
  // P vec(X) = vec(X^T)
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> p(n);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) p.indices()(i + j * d) = j + i * d;
  }
  const ComplexMatrix t = s.liouville().transpose();
  return Superoperator(d, p * t * p.transpose());
}

void require_unitary(const ComplexMatrix& u, std::string_view what, double tol) {
  require_square_finite(u, what);
  const auto n = u.rows();
  if (max_abs(u * u.adjoint() - ComplexMatrix::Identity(n, n)) > tol) {
    throw ValidationError(std::string(what) + ": matrix is not unitary");
  }
}

namespace {

void check_inputs(const SplitChannel& split, const ComplexMatrix& v, const ComplexMatrix& w,
                  const DensityMatrix& rho0) {
  require_unitary(v, "V");
  require_unitary(w, "W");
  if (v.rows() != split.channel.dim() || w.rows() != split.channel.dim() ||
      rho0.dim() != split.channel.dim()) {
    throw ValidationError("correlation: dimension mismatch");
  }
}

struct Weights {
  double plus, minus;
};

Weights weights(const SplitChannel& s) {
  return {to_double(s.C_plus), s.has_minus() ? to_double(s.C_minus) : 0.0};
}

/// Apply a system map blockwise to a (2d x 2d) joint ancilla-system state.
ComplexMatrix apply_blockwise(const SplitChannel& s, Branch b, const ComplexMatrix& joint) {
  const auto d = joint.rows() / 2;
  ComplexMatrix out(joint.rows(), joint.cols());
  for (int a = 0; a < 2; ++a) {
    for (int c = 0; c < 2; ++c) {
      out.block(a * d, c * d, d, d) = s.apply_branch(b, joint.block(a * d, c * d, d, d));
    }
  }
  return out;
}

ComplexMatrix controlled(const ComplexMatrix& u) {
  const auto d = u.rows();
  ComplexMatrix c = ComplexMatrix::Zero(2 * d, 2 * d);
  c.topLeftCorner(d, d) = u;
  c.bottomRightCorner(d, d) = ComplexMatrix::Identity(d, d);
  return c;
}

ComplexMatrix ancilla_plus(const DensityMatrix& rho0) {
  ComplexMatrix plus(2, 2);
  plus.setConstant(0.5);
  return kron(plus, rho0.matrix());
}

/// <sigma_x> - i <sigma_y> of the ancilla = 2 Tr_sys rho_{01}.
Complex ancilla_readout(const ComplexMatrix& joint) {
  const auto d = joint.rows() / 2;
  ComplexMatrix sx(2, 2), sy(2, 2);
  sx << 0, 1, 1, 0;
  sy << 0, Complex(0, -1), Complex(0, 1), 0;
  const ComplexMatrix id = ComplexMatrix::Identity(d, d);
  const Complex ex = (kron(sx, id) * joint).trace();
  const Complex ey = (kron(sy, id) * joint).trace();
  return ex.real() - Complex(0, 1) * ey.real();
}

}  // namespace

CorrelationValue two_time_direct(const SplitChannel& split, const ComplexMatrix& v,
                                 const ComplexMatrix& w, const DensityMatrix& rho0) {
  check_inputs(split, v, w, rho0);
  const Weights c = weights(split);
  const ComplexMatrix x = w * rho0.matrix();
  CorrelationValue out{};
  out.plus = c.plus * (v * split.apply_branch(Branch::plus, x)).trace();
  if (split.has_minus()) out.minus = c.minus * (v * split.apply_branch(Branch::minus, x)).trace();
  out.value = out.plus + out.minus;
  return out;
}

CorrelationValue two_time_direct(const SplitChannel& split, const ComplexMatrix& u,
                                 const DensityMatrix& rho0) {
  return two_time_direct(split, u, u, rho0);
}

CorrelationValue two_time_dual(const SplitChannel& split, const ComplexMatrix& v,
                               const ComplexMatrix& w, const DensityMatrix& rho0) {
  check_inputs(split, v, w, rho0);
  const Weights c = weights(split);
  const ComplexMatrix x = w * rho0.matrix();
  CorrelationValue out{};
  const Superoperator dp = dual_map(split.branch_map(Branch::plus));
  out.plus = c.plus * (dp.apply(v) * x).trace();
  if (split.has_minus()) {
    const Superoperator dm = dual_map(split.branch_map(Branch::minus));
    out.minus = c.minus * (dm.apply(v) * x).trace();
  }
  out.value = out.plus + out.minus;
  return out;
}

CorrelationValue two_time_ancilla(const SplitChannel& split, const ComplexMatrix& v,
                                  const ComplexMatrix& w, const DensityMatrix& rho0) {
  check_inputs(split, v, w, rho0);
  const Weights c = weights(split);
  const ComplexMatrix cw = controlled(w);
  const ComplexMatrix cv = controlled(v);
  const ComplexMatrix start = cw * ancilla_plus(rho0) * cw.adjoint();
  auto run = [&](Branch b) {
    const ComplexMatrix evolved = apply_blockwise(split, b, start);
    return ancilla_readout(cv * evolved * cv.adjoint());
  };
  CorrelationValue out{};
  out.plus = c.plus * run(Branch::plus);
  if (split.has_minus()) out.minus = c.minus * run(Branch::minus);
  out.value = out.plus + out.minus;
  return out;
}

CorrelationValue two_time_ancilla(const SplitChannel& split, const ComplexMatrix& u,
                                  const DensityMatrix& rho0) {
  return two_time_ancilla(split, u, u, rho0);
}

namespace {

void check_multi(const std::vector<double>& times, const std::vector<SplitChannel>& intervals,
                 const std::vector<ComplexMatrix>& unitaries, const DensityMatrix& rho0) {
  if (unitaries.size() < 2) throw ValidationError("multi_time: need at least two unitaries");
  if (times.size() != unitaries.size()) {
    throw ValidationError("multi_time: times and unitaries must have equal length");
  }
  if (intervals.size() + 1 != unitaries.size()) {
    throw ValidationError("multi_time: need one propagator per interval");
  }
  for (std::size_t j = 1; j < times.size(); ++j) {
    if (!(times[j] >= times[j - 1])) {
      std::ostringstream os;
      os << "multi_time: times must be nondecreasing (t" << j << " = " << times[j] << " < t"
         << j - 1 << " = " << times[j - 1] << ")";
      throw ValidationError(os.str());
    }
  }
  for (std::size_t j = 0; j < unitaries.size(); ++j) {
    require_unitary(unitaries[j], "U" + std::to_string(j + 1));
    if (unitaries[j].rows() != rho0.dim()) throw ValidationError("multi_time: dimension mismatch");
  }
  for (const auto& s : intervals) {
    if (s.channel.dim() != rho0.dim()) throw ValidationError("multi_time: dimension mismatch");
  }
}

/// Sum over branch tuples; `step` advances the carried matrix through one
/// interval on the chosen branch, `finish` turns it into a number.
template <class Step, class Finish>
Complex branch_sum(const std::vector<SplitChannel>& intervals, const ComplexMatrix& start,
                   Step step, Finish finish) {
  const std::size_t n = intervals.size();
  Complex total = 0.0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    double weight = 1.0;
    bool present = true;
    ComplexMatrix x = start;
    for (std::size_t j = 0; j < n; ++j) {
      const bool minus = (mask >> j) & 1U;
      if (minus && !intervals[j].has_minus()) {
        present = false;
        break;
      }
      const Weights w = weights(intervals[j]);
      weight *= minus ? w.minus : w.plus;
      x = step(j, minus ? Branch::minus : Branch::plus, x);
    }
    if (present) total += weight * finish(x);
  }
  return total;
}

}  // namespace

Complex multi_time(const std::vector<double>& times, const std::vector<SplitChannel>& intervals,
                   const std::vector<ComplexMatrix>& unitaries, const DensityMatrix& rho0) {
  check_multi(times, intervals, unitaries, rho0);
  return branch_sum(
      intervals, unitaries[0] * rho0.matrix(),
      [&](std::size_t j, Branch b, const ComplexMatrix& x) {
        return ComplexMatrix(unitaries[j + 1] * intervals[j].apply_branch(b, x));
      },
      [](const ComplexMatrix& x) { return x.trace(); });
}

Complex multi_time_ancilla(const std::vector<double>& times,
                           const std::vector<SplitChannel>& intervals,
                           const std::vector<ComplexMatrix>& unitaries,
                           const DensityMatrix& rho0) {
  check_multi(times, intervals, unitaries, rho0);
  const ComplexMatrix c0 = controlled(unitaries[0]);
  return branch_sum(
      intervals, ComplexMatrix(c0 * ancilla_plus(rho0) * c0.adjoint()),
      [&](std::size_t j, Branch b, const ComplexMatrix& x) {
        const ComplexMatrix c = controlled(unitaries[j + 1]);
        return ComplexMatrix(c * apply_blockwise(intervals[j], b, x) * c.adjoint());
      },
      ancilla_readout);
}

Complex observable_correlation(const ComplexMatrix& o, const SplitChannel& split,
                               const DensityMatrix& rho0, CorrelationMethod method) {
  if (o.rows() != split.channel.dim()) throw ValidationError("observable: dimension mismatch");
  const UnitaryPair p = decompose_observable(o);
  const ComplexMatrix id = ComplexMatrix::Identity(o.rows(), o.cols());
  const double g = p.gamma;
  auto corr = [&](const ComplexMatrix& v, const ComplexMatrix& w) {
    return method == CorrelationMethod::direct ? two_time_direct(split, v, w, rho0).value
                                               : two_time_ancilla(split, v, w, rho0).value;
  };
  // O = beta O' - alpha I, O' = U_a + gamma U_b
  const Complex oo = corr(p.u_a, p.u_a) + g * corr(p.u_a, p.u_b) + g * corr(p.u_b, p.u_a) +
                     g * g * corr(p.u_b, p.u_b);
  const Complex oi = corr(p.u_a, id) + g * corr(p.u_b, id);
  const Complex io = corr(id, p.u_a) + g * corr(id, p.u_b);
  const Complex ii = corr(id, id);
  const double a = p.shift_alpha, b = p.scale_beta;
  return b * b * oo - a * b * oi - a * b * io + a * a * ii;
}

}  // namespace memsim
