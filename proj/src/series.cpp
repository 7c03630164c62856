#include "memsim/series.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "memsim/random.hpp"
#include "wide_linalg.hpp"

namespace memsim {

using detail::WideMatrix;
using detail::WideVector;

namespace {

void require_budget_inputs(double c, double y, double t, double epsilon) {
  for (double v : {c, y, t}) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ValidationError("truncation order: c, y and t must be finite and nonnegative");
    }
  }
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw ValidationError("truncation order: epsilon must lie in (0, 1)");
  }
}

int ceil_to_order(double v) {
  if (v > static_cast<double>(INT_MAX / 2)) {
    throw NumericError("truncation order: required order overflows");
  }
  return std::max(0, static_cast<int>(std::ceil(v)));
}

}  // namespace

int truncation_order(double c, double y, double t, double epsilon) {
  require_budget_inputs(c, y, t, epsilon);
  return ceil_to_order((std::numbers::e + 1.0) * c * y * t + std::log(1.0 / epsilon) - 1.0);
}

int truncation_order_composition(double c, double y, double t, double epsilon) {
  require_budget_inputs(c, y, t, epsilon);
  return ceil_to_order((std::numbers::e + 1.0) * c * y * t + std::log(1.0 / epsilon));
}

double exponential_tail(double x, int order) {
  if (order < 0) throw ValidationError("exponential_tail: order must be >= 0");
  if (x <= 0.0) return 0.0;
  const int first = order + 1;
  double term = std::exp(first * std::log(x) - std::lgamma(first + 1.0));
  double sum = 0.0;
  for (int i = first;; ++i) {
    sum += term;
    if (static_cast<double>(i) > x && term <= 1e-18 * sum) break;
    if (!std::isfinite(sum)) break;
    term *= x / static_cast<double>(i + 1);
  }
  return sum;
}

TruncationBudget::TruncationBudget(double epsilon_, double a_rate_, int order_M_, double t)
    : epsilon(epsilon_), a_rate(a_rate_), order_M(order_M_) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw ValidationError("truncation budget: epsilon must lie in (0, 1)");
  }
  const double required = a_rate * t + std::log(1.0 / epsilon) - 1.0;
  if (static_cast<double>(order_M) < required) {
    std::ostringstream os;
    os << "truncation budget: order " << order_M << " below required " << required;
    throw ValidationError(os.str());
  }
}

// ---------------------------------------------------------------------------

namespace {

SeriesCoefficients transform_core(std::vector<WideReal> d, double zero_snap) {
  if (d.empty()) throw ValidationError("binomial_transform: need at least d_0");
  const std::size_t m = d.size() - 1;
  // c(z) = sum_k d_k (z - 1)^k by Horner's scheme in (z - 1).
  std::vector<WideReal> c(m + 1, WideReal(0));
  c[0] = d[m];
  for (std::size_t k = m; k-- > 0;) {
    const std::size_t deg = m - k;  // degree after multiplication
    for (std::size_t i = deg; i > 0; --i) c[i] = c[i - 1] - c[i];
    c[0] = -c[0] + d[k];
  }
  SeriesCoefficients out;
  out.d = std::move(d);
  out.c_plus.assign(m + 1, WideReal(0));
  out.c_minus.assign(m + 1, WideReal(0));
  const WideReal snap(zero_snap);
  for (std::size_t i = 0; i <= m; ++i) {
    if (c[i] < 0 && c[i] > -snap) c[i] = 0;
    if (c[i] > 0) {
      out.c_plus[i] = c[i];
      out.C_plus += c[i];
    } else if (c[i] < 0) {
      out.c_minus[i] = c[i];
      out.C_minus += c[i];
    }
  }
  out.c = std::move(c);
  return out;
}

}  // namespace

SeriesCoefficients binomial_transform(std::span<const double> d, double zero_snap) {
  std::vector<WideReal> wide(d.begin(), d.end());
  SeriesCoefficients out = transform_core(std::move(wide), zero_snap);
  out.d_raw.assign(d.begin(), d.end());
  return out;
}

SeriesCoefficients binomial_transform(const NestedCoefficients& d, std::size_t node,
                                      double zero_snap) {
  if (node >= d.grid().size()) throw ValidationError("binomial_transform: node out of range");
  std::vector<WideReal> wide(static_cast<std::size_t>(d.order() + 1));
  std::vector<double> raw(wide.size());
  const WideReal scale(d.scale());
  WideReal power(1);
  for (int i = 0; i <= d.order(); ++i) {
    raw[static_cast<std::size_t>(i)] = d.raw(i, node);
    wide[static_cast<std::size_t>(i)] = WideReal(d.raw(i, node)) * power;
    power *= scale;
  }
  SeriesCoefficients out = transform_core(std::move(wide), zero_snap);
  out.d_raw = std::move(raw);
  out.scale = d.scale();
  out.node = node;
  out.t = d.grid().time(node);
  return out;
}

// ---------------------------------------------------------------------------

ComplexMatrix SplitChannel::apply_branch(Branch b, const ComplexMatrix& x) const {
  const auto& w = b == Branch::plus ? plus_weights : minus_weights;
  if (w.empty()) throw ValidationError("split channel: requested branch is absent");
  ComplexVector y = vectorize(x);
  ComplexVector acc = w[0] * y;
  for (std::size_t i = 1; i < w.size(); ++i) {
    y = channel.apply(y);
    if (w[i] != 0.0) acc += w[i] * y;
  }
  return unvectorize(acc, channel.dim());
}

Superoperator SplitChannel::branch_map(Branch b) const {
  const auto& w = b == Branch::plus ? plus_weights : minus_weights;
  if (w.empty()) throw ValidationError("split channel: requested branch is absent");
  Superoperator power = Superoperator::identity(channel.dim());
  ComplexMatrix acc = w[0] * power.liouville();
  for (std::size_t i = 1; i < w.size(); ++i) {
    power = channel * power;
    if (w[i] != 0.0) acc += w[i] * power.liouville();
  }
  return Superoperator(channel.dim(), std::move(acc));
}

Superoperator SplitChannel::combined_map() const {
  ComplexMatrix acc = to_double(C_plus) * branch_map(Branch::plus).liouville();
  if (has_minus()) acc += to_double(C_minus) * branch_map(Branch::minus).liouville();
  return Superoperator(channel.dim(), std::move(acc));
}

SplitChannel SplitChannel::identity(int dim) {
  return SplitChannel{Superoperator::identity(dim), {1.0}, {}, WideReal(1), WideReal(0)};
}

SplitChannel make_split_channel(const SeriesCoefficients& series, const Superoperator& e) {
  SplitChannel out{e, {}, {}, series.C_plus, series.C_minus};
  if (series.C_plus <= 0) throw NumericError("split channel: C+ must be positive");
  for (const auto& c : series.c_plus) out.plus_weights.push_back(to_double(c / series.C_plus));
  if (series.has_minus()) {
    for (const auto& c : series.c_minus) {
      out.minus_weights.push_back(to_double(c / series.C_minus));
    }
  }
  return out;
}

std::vector<std::string> check_invariants(const SplitSolution& s, double tol) {
  std::vector<std::string> issues;
  const auto& d = s.diagnostics;
  auto add = [&](bool ok, const std::string& what, double value) {
    if (!ok) {
      std::ostringstream os;
      os << "t=" << s.t << ": " << what << " (" << value << ")";
      issues.push_back(os.str());
    }
  };
  add(d.trace_error <= tol, "trace law violated", d.trace_error);
  add(d.weight_sum_error <= tol, "C+ + C- != 1", d.weight_sum_error);
  add(d.split_residual <= tol, "rho~ != C+ rho+ + C- rho-", d.split_residual);
  add(d.min_eig_plus >= -tol, "rho+ not PSD", d.min_eig_plus);
  if (s.has_minus()) add(d.min_eig_minus >= -tol, "rho- not PSD", d.min_eig_minus);
  add(d.trace_norm <= d.gronwall_bound * (1.0 + 1e-12) + tol, "Groenwall bound exceeded",
      d.trace_norm - d.gronwall_bound);
  return issues;
}

// ---------------------------------------------------------------------------

struct SplitAssembler::Impl {
  int dim = 0;
  Superoperator channel;
  double scale = 1.0;
  int max_order = 0;
  WideMatrix e_wide;
  WideMatrix generator_wide;  // E - I
  ComplexVector rho0;
  std::vector<WideVector> powers;         // E^i rho0
  std::vector<ComplexVector> dform;       // (scale (E - I))^i rho0
  std::optional<ComplexMatrix> source;
  std::vector<WideVector> source_powers;  // E^i sigma
  std::vector<ComplexVector> source_dform;

  Impl(const Superoperator& e, double scale_) : channel(e), scale(scale_) {}
};

namespace {

std::vector<WideVector> wide_powers(const WideMatrix& e, const ComplexVector& v0, int order) {
  std::vector<WideVector> out;
  out.push_back(WideVector::from(v0));
  for (int i = 1; i <= order; ++i) out.push_back(e.apply(out.back()));
  return out;
}

std::vector<ComplexVector> generator_powers(const ComplexMatrix& a, const ComplexVector& v0,
                                            int order) {
  std::vector<ComplexVector> out{v0};
  for (int i = 1; i <= order; ++i) out.push_back(a * out.back());
  return out;
}

ComplexMatrix hermitian_part(const ComplexMatrix& m) { return 0.5 * (m + m.adjoint()); }

// Rounding leaves E Hermiticity- and trace-preserving only to ~1e-16, which
// the large alternating c_i amplify. Symmetrize S = P conj(S) P in double
// (exact under rounding), then fix the trace functional in wide precision.
WideMatrix exact_channel(const Superoperator& e) {
  const int d = e.dim();
  const ComplexMatrix& s = e.liouville();
  const auto n = s.rows();
  auto p = [d](Eigen::Index k) { return (k % d) * d + k / d; };
  ComplexMatrix sym(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) sym(i, j) = 0.5 * (s(i, j) + std::conj(s(p(i), p(j))));
  }
  WideMatrix w = WideMatrix::from(sym);
  const auto un = static_cast<std::size_t>(n);
  const auto ud = static_cast<std::size_t>(d);
  for (std::size_t j = 0; j < un; ++j) {
    WideReal re = 0, im = 0;
    for (std::size_t k = 0; k < ud; ++k) {
      re += w.re[k * (ud + 1) * un + j];
      im += w.im[k * (ud + 1) * un + j];
    }
    if (j % (ud + 1) == 0) re -= 1;  // vec(I) entries
    const WideReal dre = re / d, dim_ = im / d;
    for (std::size_t k = 0; k < ud; ++k) {
      w.re[k * (ud + 1) * un + j] -= dre;
      w.im[k * (ud + 1) * un + j] -= dim_;
    }
  }
  return w;
}

}  // namespace

SplitAssembler::SplitAssembler(const Superoperator& e, const DensityMatrix& rho0, int max_order,
                               double scale, const ComplexMatrix* source)
    : impl_(std::make_unique<Impl>(e, scale)) {
  if (rho0.dim() != e.dim()) throw ValidationError("assemble: rho0 dimension mismatch");
  if (max_order < 0) throw ValidationError("assemble: order must be >= 0");
  auto& im = *impl_;
  im.dim = e.dim();
  im.max_order = max_order;
  im.e_wide = exact_channel(e);
  im.generator_wide = im.e_wide;
  for (std::size_t k = 0; k < im.e_wide.n; ++k) im.generator_wide.re[k * im.e_wide.n + k] -= 1;
  const ComplexMatrix gen = e.liouville() - ComplexMatrix::Identity(e.liouville().rows(),
                                                                    e.liouville().cols());
  im.rho0 = vectorize(rho0.matrix());
  im.powers = wide_powers(im.e_wide, im.rho0, max_order);
  im.dform = generator_powers(scale * gen, im.rho0, max_order);
  if (source != nullptr) {
    require_square_finite(*source, "source");
    if (source->rows() != e.dim()) throw ValidationError("assemble: source dimension mismatch");
    im.source = *source;
    const ComplexVector sv = vectorize(*source);
    im.source_powers = wide_powers(im.e_wide, sv, max_order);
    im.source_dform = generator_powers(scale * gen, sv, max_order);
  }
}

SplitAssembler::~SplitAssembler() = default;
SplitAssembler::SplitAssembler(SplitAssembler&&) noexcept = default;

const Superoperator& SplitAssembler::channel() const { return impl_->channel; }

SplitSolution SplitAssembler::assemble(const SeriesCoefficients& series,
                                       const SeriesCoefficients* source_series) const {
  const auto& im = *impl_;
  if (series.order() > im.max_order) {
    throw ValidationError("assemble: series order exceeds the assembler's precomputed powers");
  }
  if (series.scale != im.scale) throw ValidationError("assemble: coefficient scale mismatch");
  if ((source_series != nullptr) != im.source.has_value()) {
    throw ValidationError("assemble: source coefficients and source matrix must come together");
  }
  const std::size_t n = im.powers.front().size();
  const int d = im.dim;

  WideVector n_plus(n), n_minus(n);
  for (std::size_t i = 0; i < series.c.size(); ++i) {
    n_plus.axpy(series.c_plus[i], im.powers[i]);
    n_minus.axpy(series.c_minus[i], im.powers[i]);
  }
  WideVector rho_wide = n_plus + n_minus;
  ComplexVector dform = ComplexVector::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < series.d_raw.size(); ++i) dform += series.d_raw[i] * im.dform[i];

  SplitSolution out;
  out.t = series.t;
  out.node = series.node;
  out.C_plus = to_double(series.C_plus);
  out.C_minus = to_double(series.C_minus);

  Complex expected(1.0, 0.0);
  if (source_series != nullptr) {
    if (source_series->order() > im.max_order || source_series->scale != im.scale) {
      throw ValidationError("assemble: source coefficients incompatible with the assembler");
    }
    WideVector src(n);
    for (std::size_t i = 0; i < source_series->c.size(); ++i) {
      src.axpy(source_series->c[i], im.source_powers[i]);
    }
    for (std::size_t i = 0; i < source_series->d_raw.size(); ++i) {
      dform += source_series->d_raw[i] * im.source_dform[i];
    }
    out.source = unvectorize(src.to_double(), d);
    rho_wide = rho_wide + src;
    expected += series.t * im.source->trace();
  }

  out.rho_tilde = unvectorize(rho_wide.to_double(), d);
  out.rho_plus = hermitian_part(unvectorize(n_plus.scaled(1 / series.C_plus).to_double(), d));
  WideVector recombined = n_plus.scaled(1 / series.C_plus).scaled(series.C_plus);
  if (series.has_minus()) {
    const WideVector branch = n_minus.scaled(1 / series.C_minus);
    out.rho_minus = hermitian_part(unvectorize(branch.to_double(), d));
    recombined = recombined + branch.scaled(series.C_minus);
  }
  if (out.source) recombined = recombined + WideVector::from(vectorize(*out.source));
  out.expected_trace = expected.real();

  auto& diag = out.diagnostics;
  diag.trace_error = std::abs(out.rho_tilde.trace() - expected);
  diag.weight_sum_error = to_double(abs(series.C_plus + series.C_minus - 1));
  diag.split_residual = (rho_wide - recombined).max_abs();
  diag.representation_residual = trace_norm(out.rho_tilde - unvectorize(dform, d));
  diag.min_eig_plus = min_eigenvalue(out.rho_plus);
  diag.min_eig_minus = out.rho_minus ? min_eigenvalue(*out.rho_minus) : 0.0;
  diag.trace_norm = trace_norm(out.rho_tilde);
  diag.split_conditioning = to_double(series.C_plus - series.C_minus);
  return out;
}

double SplitAssembler::operator_identity_residual(const SeriesCoefficients& series) const {
  const auto& im = *impl_;
  const auto n = static_cast<Eigen::Index>(im.powers.front().size());
  std::vector<ComplexVector> probes;
  if (im.dim <= 3) {
    for (Eigen::Index k = 0; k < n; ++k) probes.push_back(ComplexVector::Unit(n, k));
  } else {
    probes.push_back(im.rho0);
    ComplexVector a(n), b(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      a(k) = Complex(1.0 / static_cast<double>(k + 1), 0.0);
      b(k) = Complex(std::cos(0.7 * static_cast<double>(k)), std::sin(1.3 * static_cast<double>(k)));
    }
    probes.push_back(a);
    probes.push_back(b);
  }
  double worst = 0.0;
  for (const auto& p : probes) {
    WideVector x = WideVector::from(p);
    WideVector g = x;
    WideVector lhs(x.size()), rhs(x.size());
    for (std::size_t i = 0; i < series.c.size(); ++i) {
      if (i > 0) {
        x = im.e_wide.apply(x);
        g = im.generator_wide.apply(g);
      }
      lhs.axpy(series.c[i], x);
      rhs.axpy(series.d[i], g);
    }
    worst = std::max(worst, (lhs - rhs).max_abs());
  }
  return worst;
}

SplitSolution assemble(const SeriesCoefficients& series, const Superoperator& e,
                       const DensityMatrix& rho0) {
  return SplitAssembler(e, rho0, series.order(), series.scale).assemble(series);
}

// ---------------------------------------------------------------------------

namespace {

/// log10 of a bound on sum_i |c_i| at `node`: sum_k 2^k |d_k|.
double log10_coefficient_bound(const NestedCoefficients& d, std::size_t node) {
  double best = 0.0;
  const double ls = std::log10(d.scale());
  for (int k = 0; k <= d.order(); ++k) {
    const double v = std::abs(d.raw(k, node));
    if (v == 0.0) continue;
    best = std::max(best, std::log10(v) + k * (ls + std::log10(2.0)));
  }
  return best + std::log10(static_cast<double>(d.order() + 1));
}

ComplexVector dform_state(const NestedCoefficients& d, std::size_t node, const ComplexMatrix& a,
                          const ComplexVector& v0) {
  ComplexVector x = v0;
  ComplexVector acc = d.raw(0, node) * x;
  for (int i = 1; i <= d.order(); ++i) {
    x = a * x;
    acc += d.raw(i, node) * x;
  }
  return acc;
}

}  // namespace

SplitChannel SeriesRun::split_channel(std::size_t node, double zero_snap) const {
  return make_split_channel(binomial_transform(coefficients, node, zero_snap), channel);
}

SeriesRun solve_series(const KernelIntegrals& h, const Superoperator& e,
                       const DensityMatrix& rho0, const SeriesOptions& options,
                       const ComplexMatrix* source, const KernelIntegrals* refined) {
  if (rho0.dim() != e.dim()) throw ValidationError("series: rho0 dimension mismatch");
  const TimeGrid& grid = h.grid();
  const std::size_t n = grid.size();
  const double t = grid.t_max();
  const Superoperator generator = e - Superoperator::identity(e.dim());

  SeriesReport rep;
  rep.t = t;
  rep.epsilon = options.epsilon;
  rep.c_bound = h.bound_c();
  rep.y_upper = induced_norm_upper(generator);
  rep.y_sampled = sampled_norm_lower(generator, options.norm_samples, options.seed);
  rep.a_rate = (std::numbers::e + 1.0) * rep.c_bound * rep.y_upper;
  rep.kernel_nonnegative = h.kernel_nonnegative();
  rep.composition_form = options.composition_form;

  double eps_eff = options.epsilon;
  if (source != nullptr) eps_eff /= 1.0 + t * trace_norm(*source);
  rep.order_standalone = truncation_order(rep.c_bound, rep.y_upper, t, eps_eff);
  rep.order_composition = truncation_order_composition(rep.c_bound, rep.y_upper, t, eps_eff);
  const int order = options.order_override.value_or(
      options.composition_form ? rep.order_composition : rep.order_standalone);
  if (order < 0) throw ValidationError("series: order must be >= 0");
  rep.order_used = order;
  rep.truncation_bound = exponential_tail(rep.c_bound * rep.y_upper * t, order);

  std::vector<std::size_t> nodes = options.output_nodes;
  if (nodes.empty()) nodes.push_back(n - 1);
  for (std::size_t node : nodes) {
    if (node >= n) throw ValidationError("series: output node beyond the grid");
  }

  NestedCoefficients coeffs = nested_coefficients(h, order);
  std::optional<NestedCoefficients> src_coeffs;
  if (source != nullptr) {
    std::vector<double> seed(n);
    for (std::size_t j = 0; j < n; ++j) seed[j] = grid.time(j);
    src_coeffs = nested_coefficients(h, order, seed);
  }

  for (std::size_t node : nodes) {
    double need = log10_coefficient_bound(coeffs, node);
    if (src_coeffs) need = std::max(need, log10_coefficient_bound(*src_coeffs, node));
    if (need > kWideDigits10 - 30) {
      std::ostringstream os;
      os << "series: split coefficients reach 1e" << static_cast<int>(need)
         << ", beyond the working precision; use a larger lambda/epsilon or a shorter time";
      throw NumericError(os.str());
    }
  }

  SplitAssembler assembler(e, rho0, order, h.scale(), source);
  std::vector<SplitSolution> solutions;
  SeriesCoefficients last;
  for (std::size_t node : nodes) {
    SeriesCoefficients sc = binomial_transform(coeffs, node, options.zero_snap);
    std::optional<SeriesCoefficients> src_sc;
    if (src_coeffs) src_sc = binomial_transform(*src_coeffs, node, options.zero_snap);
    SplitSolution sol = assembler.assemble(sc, src_sc ? &*src_sc : nullptr);
    sol.diagnostics.gronwall_bound = std::exp(rep.y_upper * h.row_integral(node));
    solutions.push_back(std::move(sol));
    last = std::move(sc);
  }
  rep.operator_identity_residual = assembler.operator_identity_residual(last);
  rep.gronwall_bound = solutions.back().diagnostics.gronwall_bound;
  rep.split_conditioning = solutions.back().diagnostics.split_conditioning;

  if (refined != nullptr) {
    if (!(refined->grid() == grid.refined())) {
      throw ValidationError("series: refined table must live on grid.refined()");
    }
    const std::size_t node = nodes.back();
    const ComplexMatrix a = h.scale() * generator.liouville();
    const ComplexMatrix a_ref = refined->scale() * generator.liouville();
    const ComplexVector v0 = vectorize(rho0.matrix());
    NestedCoefficients fine = nested_coefficients(*refined, order);
    ComplexVector coarse_state = dform_state(coeffs, node, a, v0);
    ComplexVector fine_state = dform_state(fine, 2 * node, a_ref, v0);
    if (source != nullptr) {
      const ComplexVector sv = vectorize(*source);
      const TimeGrid fg = refined->grid();
      std::vector<double> seed(fg.size());
      for (std::size_t j = 0; j < fg.size(); ++j) seed[j] = fg.time(j);
      NestedCoefficients fine_src = nested_coefficients(*refined, order, seed);
      coarse_state += dform_state(*src_coeffs, node, a, sv);
      fine_state += dform_state(fine_src, 2 * node, a_ref, sv);
    }
    rep.quadrature_estimate =
        4.0 / 3.0 * trace_norm(unvectorize(coarse_state - fine_state, e.dim()));
  }

  return SeriesRun{rep, e, std::move(coeffs), std::move(src_coeffs), std::move(solutions)};
}

SeriesRun semimarkov_solve(const MemoryKernel& kernel, const Superoperator& e,
                           const DensityMatrix& rho0, double t, double epsilon,
                           const SemiMarkovOptions& options) {
  const TimeGrid grid(t, options.n_points);
  const KernelIntegrals h = integrate_kernel(kernel, grid);
  SeriesOptions so = options.series;
  so.epsilon = epsilon;
  if (options.estimate_quadrature) {
    const KernelIntegrals fine = integrate_kernel(kernel, grid.refined());
    return solve_series(h, e, rho0, so, nullptr, &fine);
  }
  return solve_series(h, e, rho0, so);
}

// ---------------------------------------------------------------------------

ErrorBudget compose_error_budget(double delta_per_power, double C_plus, double epsilon_tilde) {
  if (!(delta_per_power >= 0.0) || !(C_plus >= 0.0) || !(epsilon_tilde >= 0.0)) {
    throw ValidationError("compose_error_budget: inputs must be nonnegative");
  }
  const double C_minus = 1.0 - C_plus;
  ErrorBudget b;
  b.total = epsilon_tilde / 2.0 + C_plus * delta_per_power + std::abs(C_minus) * delta_per_power;
  b.delta_plus_target = C_plus > 0.0 ? epsilon_tilde / (4.0 * C_plus)
                                     : std::numeric_limits<double>::infinity();
  b.delta_minus_target = C_minus != 0.0 ? epsilon_tilde / (4.0 * std::abs(C_minus))
                                        : std::numeric_limits<double>::infinity();
  return b;
}

Superoperator perturb_channel(const Superoperator& e, double delta, std::uint64_t seed) {
  if (!(delta >= 0.0) || !std::isfinite(delta)) {
    throw ValidationError("perturb_channel: delta must be finite and nonnegative");
  }
  if (delta == 0.0) return e;
  Rng rng(seed);
  const Superoperator dl = build_lindblad(random_lindblad_spec(e.dim(), 1, rng));
  const Superoperator unit = dl * (1.0 / induced_norm_upper(dl));
  const auto deviation = [&](double s) {
    return induced_norm_upper(e * channel_exp(unit, s) - e);
  };
  double hi = delta;
  int doublings = 0;
  while (deviation(hi) <= delta) {
    hi *= 2.0;
    if (++doublings > 200) throw NumericError("perturb_channel: perturbation saturates below delta");
  }
  double lo = 0.0;
  for (int step = 0; step < 100; ++step) {
    const double mid = 0.5 * (lo + hi);
    (deviation(mid) <= delta ? lo : hi) = mid;
  }
  if (deviation(lo) < 0.5 * delta) {
    throw NumericError("perturb_channel: could not reach the target delta within 100 bisection steps");
  }
  return e * channel_exp(unit, lo);
}

PowerPerturbation perturb_channel_powers(const Superoperator& e, double delta, int max_power,
                                         std::uint64_t seed) {
  if (max_power < 1) throw ValidationError("perturb_channel_powers: max_power must be >= 1");
  double target = delta;
  for (int attempt = 0; attempt < 40; ++attempt) {
    PowerPerturbation out{perturb_channel(e, target, seed), 0.0};
    Superoperator p = e, q = out.channel;
    for (int i = 1; i <= max_power; ++i) {
      if (i > 1) {
        p = e * p;
        q = out.channel * q;
      }
      out.max_power_deviation = std::max(out.max_power_deviation, induced_norm_upper(q - p));
    }
    if (out.max_power_deviation <= delta) return out;
    target *= 0.9 * delta / out.max_power_deviation;
  }
  throw NumericError("perturb_channel_powers: could not keep all powers within delta");
}

}  // namespace memsim
