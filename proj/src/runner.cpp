#include "memsim/runner.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "memsim/correlation.hpp"
#include "memsim/csv.hpp"
#include "memsim/matrix_io.hpp"
#include "memsim/memory.hpp"
#include "memsim/series.hpp"
#include "memsim/unitary_decomp.hpp"
#include "memsim/volterra.hpp"

namespace memsim {

const char* to_string(Task t) {
  switch (t) {
    case Task::simulate: return "simulate";
    case Task::oracle: return "oracle";
    case Task::compare: return "compare";
    case Task::bound: return "bound";
    case Task::correlate: return "correlate";
    case Task::decompose: return "decompose";
    case Task::convergence: return "convergence";
  }
  return "unknown";
}

std::optional<Task> parse_task(std::string_view name) {
  for (Task t : {Task::simulate, Task::oracle, Task::compare, Task::bound, Task::correlate,
                 Task::decompose, Task::convergence}) {
    if (name == to_string(t)) return t;
  }
  return std::nullopt;
}

namespace {

/// Ordered key/value report; numeric entries also go to bounds.csv.
class Report {
 public:
  void add(const std::string& key, double v) {
    lines_.emplace_back(key, format_number(v));
    numbers_.emplace_back(key, v);
  }
  void add(const std::string& key, const std::string& v) { lines_.emplace_back(key, v); }

  std::string str() const {
    std::string out;
    for (const auto& [k, v] : lines_) out += k + " = " + v + "\n";
    return out;
  }
  CsvTable numeric_table() const {
    CsvTable t({"quantity", "value"});
    for (const auto& [k, v] : numbers_) t.add_row({k}, {v});
    return t;
  }

 private:
  std::vector<std::pair<std::string, std::string>> lines_;
  std::vector<std::pair<std::string, double>> numbers_;
};

struct Simulation {
  Superoperator L;
  std::optional<NonMarkovRun> nonmarkov;
  std::optional<SeriesRun> semimarkov;

  const SeriesRun& series() const { return nonmarkov ? nonmarkov->series : *semimarkov; }
};

std::uint64_t effective_seed(const RunConfig& c, const RunOptions& o) {
  return o.seed.value_or(c.seed);
}

Simulation simulate(const RunConfig& c, std::uint64_t seed,
                    const std::vector<std::size_t>& nodes, bool estimate_quadrature = true) {
  const Superoperator L = build_lindblad(c.system);
  const MemoryKernel kernel = c.kernel.build();
  const DensityMatrix rho0 = c.rho0();
  SeriesOptions so;
  so.epsilon = c.epsilon;
  so.composition_form = c.composition_form;
  so.output_nodes = nodes;
  so.seed = seed;
  if (c.equation == Equation::semimarkov) {
    const Superoperator e = channel_exp(L, c.channel_lambda);
    const TimeGrid grid = c.grid();
    const KernelIntegrals h = integrate_kernel(kernel, grid);
    std::optional<KernelIntegrals> fine;
    if (estimate_quadrature) fine = integrate_kernel(kernel, grid.refined());
    return Simulation{L, std::nullopt, solve_series(h, e, rho0, so, nullptr, fine ? &*fine : nullptr)};
  }
  NonMarkovOptions no;
  no.n_points = c.n_points;
  no.epsilon_split = c.epsilon_split;
  no.lambda_override = c.lambda_override;
  no.estimate_quadrature = estimate_quadrature;
  no.output_nodes = nodes;
  no.series = so;
  switch (c.equation) {
    case Equation::nonmarkov:
      return Simulation{L, nonmarkov_solve(kernel, L, rho0, c.t_max, c.epsilon, no), std::nullopt};
    case Equation::order2:
      return Simulation{L, nonmarkov_solve_order2(kernel, L, rho0, c.t_max, c.epsilon, no),
                        std::nullopt};
    case Equation::inhomogeneous:
      return Simulation{L,
                        nonmarkov_solve_inhomogeneous(kernel, L, *c.sigma, rho0, c.t_max,
                                                      c.epsilon, no),
                        std::nullopt};
    case Equation::semimarkov: break;
  }
  throw ValidationError("unsupported equation");
}

Trajectory oracle(const RunConfig& c) {
  const Superoperator L = build_lindblad(c.system);
  const MemoryKernel kernel = c.kernel.build();
  const DensityMatrix rho0 = c.rho0();
  const TimeGrid grid = c.grid();
  switch (c.equation) {
    case Equation::semimarkov:
      return oracle_semimark(kernel, channel_exp(L, c.channel_lambda), rho0, grid);
    case Equation::nonmarkov: return oracle_nonmark(kernel, L, rho0, grid);
    case Equation::order2: return oracle_order2(kernel, L, rho0, grid);
    case Equation::inhomogeneous: return oracle_inhomogeneous(kernel, L, *c.sigma, rho0, grid);
  }
  throw ValidationError("unsupported equation");
}

void report_series(Report& r, const Simulation& sim, std::uint64_t seed) {
  r.add("norm_L_upper", induced_norm_upper(sim.L));
  r.add("norm_L_sampled", sampled_norm_lower(sim.L, 32, seed));
  if (sim.nonmarkov) {
    const auto& nm = *sim.nonmarkov;
    r.add("lambda_regime", to_string(nm.budget.regime));
    r.add("lambda_c", nm.budget.c);
    r.add("lambda_epsilon", nm.budget.epsilon);
    r.add("lambda_max", nm.budget.lambda_max);
    r.add("lambda_max_main_text", nm.budget.lambda_max_main_text);
    r.add("lambda_used", nm.lambda);
    r.add("certified", nm.certified ? "true" : "false");
    for (std::size_t k = 0; k < nm.flags.size(); ++k) r.add("flag_" + std::to_string(k), nm.flags[k]);
  }
  const SeriesReport& s = sim.series().report;
  r.add("series_epsilon", s.epsilon);
  r.add("kernel_bound_c", s.c_bound);
  r.add("norm_E_minus_I_upper", s.y_upper);
  r.add("norm_E_minus_I_sampled", s.y_sampled);
  r.add("rate_a", s.a_rate);
  r.add("order_standalone", static_cast<double>(s.order_standalone));
  r.add("order_composition", static_cast<double>(s.order_composition));
  r.add("order_used", static_cast<double>(s.order_used));
  r.add("truncation_bound", s.truncation_bound);
  if (s.quadrature_estimate) r.add("quadrature_estimate", *s.quadrature_estimate);
  r.add("gronwall_bound", s.gronwall_bound);
  r.add("kernel_nonnegative", s.kernel_nonnegative ? "true" : "false");
  r.add("operator_identity_residual", s.operator_identity_residual);
  r.add("split_conditioning", s.split_conditioning);
  const auto& f = sim.series().final().diagnostics;
  r.add("final_trace_error", f.trace_error);
  r.add("final_weight_sum_error", f.weight_sum_error);
  r.add("final_min_eig_plus", f.min_eig_plus);
  r.add("final_min_eig_minus", f.min_eig_minus);
  r.add("final_representation_residual", f.representation_residual);
  std::size_t violations = 0;
  for (const auto& sol : sim.series().solutions) violations += check_invariants(sol).size();
  r.add("invariant_violations", static_cast<double>(violations));
}

std::vector<std::string> state_header(int dim, std::vector<std::string> head) {
  for (int k = 0; k < dim * dim; ++k) {
    head.push_back("re" + std::to_string(k));
    head.push_back("im" + std::to_string(k));
  }
  return head;
}

void append_state(std::vector<double>& row, const ComplexMatrix& m) {
  const ComplexVector v = vectorize(m);
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    row.push_back(v(k).real());
    row.push_back(v(k).imag());
  }
}

void write_common(const RunConfig& c, const RunOptions& o, const Report& r) {
  write_file_atomic(o.output_dir / "report.txt", r.str());
  nlohmann::json j = c.to_json();
  j["seed"] = effective_seed(c, o);
  write_file_atomic(o.output_dir / "config.resolved.json", j.dump(2) + "\n");
}

// --------------------------------------------------------------------------

void task_simulate(const RunConfig& c, const RunOptions& o, std::ostream& log) {
  const auto seed = effective_seed(c, o);
  const Simulation sim = simulate(c, seed, c.output_nodes());
  auto header = state_header(c.dim(), {"t"});
  header.insert(header.end(), {"trace_re", "trace_im", "C_plus", "C_minus", "min_eig_plus",
                               "min_eig_minus", "trace_norm", "gronwall_bound"});
  CsvTable table(header);
  for (const auto& s : sim.series().solutions) {
    std::vector<double> row{s.t};
    append_state(row, s.rho_tilde);
    const Complex tr = s.rho_tilde.trace();
    row.insert(row.end(), {tr.real(), tr.imag(), s.C_plus, s.C_minus, s.diagnostics.min_eig_plus,
                           s.diagnostics.min_eig_minus, s.diagnostics.trace_norm,
                           s.diagnostics.gronwall_bound});
    table.add_row(row);
  }
  table.write(o.output_dir / "solution.csv");
  Report r;
  r.add("task", "simulate");
  r.add("equation", to_string(c.equation));
  r.add("kernel", c.kernel.build().describe());
  report_series(r, sim, seed);
  write_common(c, o, r);
  log << "simulate: " << table.rows() << " nodes, order M = " << sim.series().report.order_used
      << "\n";
}

void task_oracle(const RunConfig& c, const RunOptions& o, std::ostream& log) {
  const Trajectory tr = oracle(c);
  write_trajectory_csv(tr, o.output_dir / "trajectory.csv");
  Report r;
  r.add("task", "oracle");
  r.add("equation", to_string(tr.equation));
  r.add("kernel", c.kernel.build().describe());
  r.add("nodes", static_cast<double>(tr.states.size()));
  r.add("max_trace_error", tr.max_trace_error());
  double min_eig = std::numeric_limits<double>::infinity();
  double max_norm = 0.0;
  for (const auto& s : tr.states) {
    min_eig = std::min(min_eig, min_eigenvalue(s));
    max_norm = std::max(max_norm, trace_norm(s));
  }
  r.add("min_eigenvalue", min_eig);
  r.add("max_trace_norm", max_norm);
  write_common(c, o, r);
  log << "oracle: " << tr.states.size() << " nodes\n";
}

void task_compare(const RunConfig& c, const RunOptions& o, std::ostream& log) {
  const auto seed = effective_seed(c, o);
  const Simulation sim = simulate(c, seed, c.output_nodes());
  const Trajectory tr = oracle(c);
  const SeriesReport& s = sim.series().report;
  double bound = std::numeric_limits<double>::quiet_NaN();
  if (c.equation == Equation::semimarkov) {
    bound = s.truncation_bound + s.quadrature_estimate.value_or(0.0);
  } else if (sim.nonmarkov && sim.nonmarkov->certified) {
    bound = c.epsilon + s.quadrature_estimate.value_or(0.0);
  }
  CsvTable table({"t", "trace_distance", "bound", "bound_satisfied"});
  double worst = 0.0;
  bool bound_ok = true;
  for (const auto& sol : sim.series().solutions) {
    const double dist = trace_norm(sol.rho_tilde - tr.states[sol.node]);
    worst = std::max(worst, dist);
    const bool ok = std::isnan(bound) || dist <= bound;
    bound_ok = bound_ok && ok;
    table.add_row({sol.t, dist, bound, ok ? 1.0 : 0.0});
  }
  table.write(o.output_dir / "compare.csv");
  Report r;
  r.add("task", "compare");
  r.add("equation", to_string(c.equation));
  r.add("kernel", c.kernel.build().describe());
  report_series(r, sim, seed);
  r.add("max_trace_distance", worst);
  r.add("tolerance", c.tolerance);
  r.add("compared_bound", bound);
  r.add("bound_satisfied", bound_ok ? "true" : "false");
  write_common(c, o, r);
  log << "compare: max trace distance " << format_number(worst) << " (tolerance "
      << format_number(c.tolerance) << ")\n";
  if (worst > c.tolerance) {
    throw NumericError("compare: max trace distance " + format_number(worst) +
                       " exceeds tolerance " + format_number(c.tolerance));
  }
}

void task_bound(const RunConfig& c, const RunOptions& o, std::ostream& log) {
  const auto seed = effective_seed(c, o);
  const Superoperator L = build_lindblad(c.system);
  const MemoryKernel kernel = c.kernel.build();
  const TimeGrid grid = c.grid();
  Report r;
  r.add("task", "bound");
  r.add("equation", to_string(c.equation));
  r.add("kernel", kernel.describe());
  r.add("t", c.t_max);
  r.add("epsilon", c.epsilon);
  const double norm_L = induced_norm_upper(L);
  r.add("norm_L_upper", norm_L);
  r.add("norm_L_sampled", sampled_norm_lower(L, 32, seed));
  const KernelIntegrals k = c.equation == Equation::order2 ? effective_kernel_order2(kernel, grid)
                                                           : integrate_kernel(kernel, grid);
  double lambda = c.channel_lambda;
  double series_eps = c.epsilon;
  if (c.equation != Equation::semimarkov) {
    series_eps = c.epsilon * (1.0 - c.epsilon_split);
    const double eps_l = std::min(c.epsilon * c.epsilon_split, 0.5);
    if (k.bound_c() > 0.0 && norm_L > 0.0) {
      const LambdaBudget b = lambda_budget(k.bound_c(), norm_L, c.t_max, eps_l);
      r.add("lambda_regime", to_string(b.regime));
      r.add("lambda_c", b.c);
      r.add("lambda_epsilon", b.epsilon);
      r.add("lambda_max", b.lambda_max);
      r.add("lambda_max_main_text", b.lambda_max_main_text);
      lambda = c.lambda_override.value_or(b.lambda_max);
    } else {
      lambda = c.lambda_override.value_or(1.0);
    }
    r.add("lambda_used", lambda);
  }
  const Superoperator e = channel_exp(L, lambda);
  const KernelIntegrals h = c.equation == Equation::semimarkov ? k : k.scaled(1.0 / lambda);
  const Superoperator g = e - Superoperator::identity(e.dim());
  const double y = induced_norm_upper(g);
  double eps_eff = series_eps;
  if (c.sigma && c.equation == Equation::inhomogeneous) {
    eps_eff /= 1.0 + c.t_max * trace_norm(*c.sigma);
  }
  r.add("series_epsilon", eps_eff);
  r.add("kernel_bound_c", h.bound_c());
  r.add("norm_E_minus_I_upper", y);
  r.add("norm_E_minus_I_sampled", sampled_norm_lower(g, 32, seed));
  r.add("rate_a", (std::numbers::e + 1.0) * h.bound_c() * y);
  const int m1 = truncation_order(h.bound_c(), y, c.t_max, eps_eff);
  r.add("order_standalone", static_cast<double>(m1));
  r.add("order_composition",
        static_cast<double>(truncation_order_composition(h.bound_c(), y, c.t_max, eps_eff)));
  r.add("truncation_bound", exponential_tail(h.bound_c() * y * c.t_max, m1));
  r.add("gronwall_bound", std::exp(y * h.row_integral(grid.size() - 1)));
  r.numeric_table().write(o.output_dir / "bounds.csv");
  write_common(c, o, r);
  log << "bound: order M = " << m1 << "\n";
}

std::pair<ComplexMatrix, ComplexMatrix> two_time_pair(const RunConfig& c) {
  const auto& us = c.correlation.unitaries;
  if (us.empty()) throw ConfigError("config field 'correlation.unitaries': at least one unitary required");
  if (us.size() == 1) return {us[0], us[0]};
  return {us[1], us[0]};
}

void task_correlate(const RunConfig& c, const RunOptions& o, std::ostream& log) {
  if (c.equation == Equation::inhomogeneous) {
    throw ConfigError("config field 'equation': correlate needs a homogeneous equation");
  }
  const auto seed = effective_seed(c, o);
  const DensityMatrix rho0 = c.rho0();
  const TimeGrid grid = c.grid();
  const auto& times = c.correlation.times;
  const bool multi = times.size() >= 2;
  std::vector<std::size_t> nodes = c.output_nodes();
  std::vector<std::size_t> interval_nodes;
  if (multi) {
    if (c.correlation.unitaries.size() != times.size()) {
      throw ConfigError("config field 'correlation.unitaries': need one unitary per time");
    }
    for (std::size_t j = 1; j < times.size(); ++j) {
      const std::size_t node = grid.node_of(times[j] - times[j - 1]);
      interval_nodes.push_back(node);
      nodes.push_back(node);
    }
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  }
  const Simulation sim = simulate(c, seed, nodes, false);
  const SeriesRun& run = sim.series();
  const auto [v, w] = two_time_pair(c);

  std::vector<std::string> header{"t",       "re_D",    "im_D",     "re_D_ancilla", "im_D_ancilla",
                                  "re_plus", "im_plus", "re_minus", "im_minus",     "C_plus",
                                  "C_minus", "abs_diff"};
  const auto& obs = c.correlation.observable;
  if (obs) header.insert(header.end(), {"re_O", "im_O"});
  CsvTable table(header);
  double worst = 0.0;
  for (std::size_t node : c.output_nodes()) {
    const SplitChannel split = run.split_channel(node);
    const CorrelationValue d = two_time_direct(split, v, w, rho0);
    const CorrelationValue a = two_time_ancilla(split, v, w, rho0);
    const double diff = std::abs(d.value - a.value);
    worst = std::max(worst, diff);
    std::vector<double> row{grid.time(node), d.value.real(), d.value.imag(), a.value.real(),
                            a.value.imag(),  d.plus.real(),  d.plus.imag(),  d.minus.real(),
                            d.minus.imag(),  to_double(split.C_plus),
                            to_double(split.C_minus), diff};
    if (obs) {
      const Complex oc = observable_correlation(*obs, split, rho0);
      row.insert(row.end(), {oc.real(), oc.imag()});
    }
    table.add_row(row);
  }
  table.write(o.output_dir / "correlation.csv");
  Report r;
  r.add("task", "correlate");
  r.add("equation", to_string(c.equation));
  r.add("kernel", c.kernel.build().describe());
  report_series(r, sim, seed);
  r.add("max_ancilla_direct_difference", worst);
  if (multi) {
    std::vector<SplitChannel> intervals;
    for (std::size_t node : interval_nodes) {
      intervals.push_back(node == 0 ? SplitChannel::identity(c.dim()) : run.split_channel(node));
    }
    const Complex m = multi_time(times, intervals, c.correlation.unitaries, rho0);
    const Complex ma = multi_time_ancilla(times, intervals, c.correlation.unitaries, rho0);
    CsvTable mt({"n_times", "re_D", "im_D", "re_D_ancilla", "im_D_ancilla", "abs_diff"});
    mt.add_row({static_cast<double>(times.size()), m.real(), m.imag(), ma.real(), ma.imag(),
                std::abs(m - ma)});
    mt.write(o.output_dir / "multi_time.csv");
    r.add("multi_time_re", m.real());
    r.add("multi_time_im", m.imag());
    r.add("multi_time_ancilla_difference", std::abs(m - ma));
  }
  write_common(c, o, r);
  log << "correlate: " << table.rows() << " times, max ancilla/direct difference "
      << format_number(worst) << "\n";
}

void task_decompose(const RunConfig& c, const RunOptions& o, std::ostream& log) {
  if (!c.observable) throw ConfigError("config field 'observable': required by decompose");
  const NormalizedObservable n = normalize_observable(*c.observable);
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(n.matrix, Eigen::EigenvaluesOnly);
  const std::vector<double> eigs(es.eigenvalues().data(),
                                 es.eigenvalues().data() + es.eigenvalues().size());
  const GammaRange range = gamma_range(eigs);
  const double gamma = c.gamma.value_or(range.midpoint());
  UnitaryPair p = decompose(n.matrix, gamma);
  p.shift_alpha = n.alpha;
  p.scale_beta = n.beta;
  const auto dim = n.matrix.rows();
  const ComplexMatrix id = ComplexMatrix::Identity(dim, dim);
  const double ua = max_abs(p.u_a * p.u_a.adjoint() - id);
  const double ub = max_abs(p.u_b * p.u_b.adjoint() - id);
  const double rec = max_abs(n.matrix - p.u_a - gamma * p.u_b);
  const double orig = max_abs(*c.observable - (p.scale_beta * (p.u_a + gamma * p.u_b) - p.shift_alpha * id));
  nlohmann::json j;
  j["u_a"] = matrix_to_json(p.u_a);
  j["u_b"] = matrix_to_json(p.u_b);
  j["gamma"] = gamma;
  j["gamma_range"] = {range.lo, range.hi};
  j["alpha"] = p.shift_alpha;
  j["beta"] = p.scale_beta;
  j["residuals"] = {{"unitarity_a", ua}, {"unitarity_b", ub}, {"reconstruction", rec},
                    {"observable_reconstruction", orig}};
  write_file_atomic(o.output_dir / "decomposition.json", j.dump(2) + "\n");
  Report r;
  r.add("task", "decompose");
  r.add("gamma", gamma);
  r.add("gamma_min", range.lo);
  r.add("gamma_max", range.hi);
  r.add("alpha", p.shift_alpha);
  r.add("beta", p.scale_beta);
  r.add("unitarity_residual_a", ua);
  r.add("unitarity_residual_b", ub);
  r.add("reconstruction_residual", rec);
  r.add("observable_reconstruction_residual", orig);
  write_common(c, o, r);
  log << "decompose: gamma " << format_number(gamma) << ", reconstruction residual "
      << format_number(rec) << "\n";
}

// --------------------------------------------------------------------------

double convergence_error(const std::string& q, const RunConfig& c, std::size_t n) {
  const TimeGrid grid(c.t_max, n);
  const double t = c.t_max;
  if (q == "oracle_markov") {
    const Superoperator L = build_lindblad(c.system);
    const Trajectory tr = oracle_nonmark(MemoryKernel::markov_delta(), L, c.rho0(), grid);
    const ComplexMatrix exact = channel_exp(L, t).apply(c.initial_state);
    return trace_norm(tr.final() - exact);
  }
  if (q == "oracle_semimark") {
    const Superoperator e = channel_exp(build_lindblad(c.system), c.channel_lambda);
    const Trajectory tr = oracle_semimark(MemoryKernel::markov_delta(), e, c.rho0(), grid);
    const Superoperator g = e - Superoperator::identity(e.dim());
    const ComplexMatrix exact = channel_exp(g, t).apply(c.initial_state);
    return trace_norm(tr.final() - exact);
  }
  if (q == "nested_d2") {
    const NestedCoefficients d = nested_coefficients(integrate_kernel(MemoryKernel::constant(1.0), grid), 2);
    return std::abs(d(2, n - 1) - t * t * t * t / 24.0);
  }
  if (q == "nested_d3") {
    const NestedCoefficients d = nested_coefficients(integrate_kernel(MemoryKernel::markov_delta(), grid), 3);
    return std::abs(d(3, n - 1) - t * t * t / 6.0);
  }
  if (q == "zero") {
    const Superoperator L = build_lindblad(c.system);
    const Trajectory tr = oracle_nonmark(MemoryKernel::constant(0.0), L, c.rho0(), grid);
    return trace_norm(tr.final() - c.initial_state);
  }
  throw ConfigError("config field 'convergence.quantity': unknown quantity '" + q +
                    "' (oracle_markov, oracle_semimark, nested_d2, nested_d3, zero, all)");
}

ConvergenceSeries summarize(std::string q, std::vector<ConvergencePoint> pts) {
  ConvergenceSeries s{std::move(q), std::move(pts), {}, 0.0, false};
  const auto nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> xs, ys;
  for (std::size_t l = 0; l < s.points.size(); ++l) {
    const auto& p = s.points[l];
    if (p.error >= kSaturationLevel) {
      xs.push_back(-std::log2(p.dt));
      ys.push_back(std::log2(p.error));
    }
    if (l + 1 < s.points.size()) {
      const double a = p.error, b = s.points[l + 1].error;
      s.slopes.push_back(a >= kSaturationLevel && b >= kSaturationLevel ? std::log2(a / b) : nan);
    }
  }
  if (xs.size() < 2) {
    s.saturated = true;
    s.fitted_slope = nan;
    return s;
  }
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxy += (xs[k] - mx) * (ys[k] - my);
    sxx += (xs[k] - mx) * (xs[k] - mx);
  }
  s.fitted_slope = -sxy / sxx;
  return s;
}

void task_convergence(const RunConfig& c, const RunOptions& o, std::ostream& log) {
  const auto studies = convergence_study(c, c.convergence.levels, o.threads);
  CsvTable table({"quantity", "status", "level", "n_points", "dt", "error", "slope"});
  Report r;
  r.add("task", "convergence");
  r.add("levels", static_cast<double>(c.convergence.levels));
  for (const auto& s : studies) {
    for (std::size_t l = 0; l < s.points.size(); ++l) {
      const auto& p = s.points[l];
      const double slope = l == 0 ? std::numeric_limits<double>::quiet_NaN() : s.slopes[l - 1];
      const bool sat = p.error < kSaturationLevel;
      table.add_row({s.quantity, sat ? "saturated" : "ok"},
                    {static_cast<double>(l), static_cast<double>(p.n_points), p.dt, p.error, slope});
    }
    if (s.saturated) {
      r.add("slope_" + s.quantity, "saturated");
    } else {
      r.add("slope_" + s.quantity, s.fitted_slope);
    }
    log << "convergence " << s.quantity << ": "
        << (s.saturated ? std::string("saturated") : format_number(s.fitted_slope)) << "\n";
  }
  table.write(o.output_dir / "convergence.csv");
  write_common(c, o, r);
}

}  // namespace

std::vector<ConvergenceSeries> convergence_study(const RunConfig& config, int levels,
                                                 int threads) {
  if (levels < 3) throw ConfigError("config field 'convergence.levels': need at least 3 levels");
  if (levels > 12) throw ConfigError("config field 'convergence.levels': at most 12 levels");
  std::vector<std::string> quantities;
  if (config.convergence.quantity == "all") {
    quantities = {"oracle_markov", "oracle_semimark", "nested_d2", "nested_d3", "zero"};
  } else {
    quantities = {config.convergence.quantity};
  }
  std::vector<ConvergenceSeries> out;
  for (const auto& q : quantities) {
    std::vector<ConvergencePoint> pts(static_cast<std::size_t>(levels));
    for (int l = 0; l < levels; ++l) {
      const std::size_t n = (config.n_points - 1) * (std::size_t{1} << l) + 1;
      pts[static_cast<std::size_t>(l)] = {n, config.t_max / static_cast<double>(n - 1), 0.0};
    }
    if (threads > 1) {
      std::vector<std::future<double>> fut;
      for (auto& p : pts) {
        fut.push_back(std::async(std::launch::async,
                                 [&, n = p.n_points] { return convergence_error(q, config, n); }));
      }
      for (std::size_t l = 0; l < pts.size(); ++l) pts[l].error = fut[l].get();
    } else {
      for (auto& p : pts) p.error = convergence_error(q, config, p.n_points);
    }
    out.push_back(summarize(q, std::move(pts)));
  }
  return out;
}

void run_task(Task task, const RunConfig& config, const RunOptions& options, std::ostream& log) {
  std::filesystem::create_directories(options.output_dir);
  switch (task) {
    case Task::simulate: return task_simulate(config, options, log);
    case Task::oracle: return task_oracle(config, options, log);
    case Task::compare: return task_compare(config, options, log);
    case Task::bound: return task_bound(config, options, log);
    case Task::correlate: return task_correlate(config, options, log);
    case Task::decompose: return task_decompose(config, options, log);
    case Task::convergence: return task_convergence(config, options, log);
  }
}

int run(Task task, const RunConfig& config, const RunOptions& options, std::ostream& log,
        std::ostream& err) {
  try {
    run_task(task, config, options, log);
    return 0;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "file error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace memsim
