#include "memsim/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "memsim/linalg.hpp"

namespace memsim {

const char* to_string(KernelFamily f) {
  switch (f) {
    case KernelFamily::constant: return "constant";
    case KernelFamily::exponential: return "exponential";
    case KernelFamily::gaussian: return "gaussian";
    case KernelFamily::markov_delta: return "markov_delta";
    case KernelFamily::tabulated: return "tabulated";
  }
  return "unknown";
}

TabulatedKernel::TabulatedKernel(std::vector<double> nodes, std::vector<double> values)
    : nodes_(std::move(nodes)), values_(std::move(values)) {
  if (nodes_.size() < 2) throw ValidationError("tabulated kernel: need at least two nodes");
  if (!std::is_sorted(nodes_.begin(), nodes_.end()) ||
      std::adjacent_find(nodes_.begin(), nodes_.end()) != nodes_.end()) {
    throw ValidationError("tabulated kernel: nodes must be strictly increasing");
  }
  if (values_.size() != nodes_.size() * nodes_.size()) {
    throw ValidationError("tabulated kernel: value table size mismatch");
  }
}

TabulatedKernel TabulatedKernel::load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("tabulated kernel: cannot open " + path.string());
  std::string line;
  std::getline(in, line);  // header
  std::map<std::pair<double, double>, double> entries;
  std::vector<double> nodes;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double t = 0, s = 0, k = 0;
    if (!(ls >> t >> s >> k)) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": expected three numeric columns t,s,K");
    }
    if (!std::isfinite(k)) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": non-finite K");
    }
    entries[{t, s}] = k;
    nodes.push_back(t);
    nodes.push_back(s);
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  const std::size_t n = nodes.size();
  std::vector<double> values(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      auto it = entries.find({nodes[i], nodes[j]});
      if (it == entries.end()) {
        std::ostringstream os;
        os << path.string() << ": missing entry for t=" << nodes[i] << ", s=" << nodes[j];
        throw ValidationError(os.str());
      }
      values[i * n + j] = it->second;
    }
  }
  return TabulatedKernel(std::move(nodes), std::move(values));
}

double TabulatedKernel::at(std::size_t i, std::size_t j) const {
  const std::size_t n = nodes_.size();
  return j <= i ? values_[i * n + j] : values_[i * n + i];
}

double TabulatedKernel::operator()(double t, double s) const {
  const auto locate = [&](double x) {
    if (x < nodes_.front() - 1e-12 || x > nodes_.back() + 1e-12) {
      std::ostringstream os;
      os << "tabulated kernel: point " << x << " outside table range";
      throw ValidationError(os.str());
    }
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
    std::size_t hi = static_cast<std::size_t>(it - nodes_.begin());
    hi = std::clamp<std::size_t>(hi, 1, nodes_.size() - 1);
    const std::size_t lo = hi - 1;
    const double w = std::clamp((x - nodes_[lo]) / (nodes_[hi] - nodes_[lo]), 0.0, 1.0);
    return std::pair{lo, w};
  };
  const auto [ti, tw] = locate(t);
  const auto [si, sw] = locate(s);
  return (1 - tw) * (1 - sw) * at(ti, si) + (1 - tw) * sw * at(ti, si + 1) +
         tw * (1 - sw) * at(ti + 1, si) + tw * sw * at(ti + 1, si + 1);
}

MemoryKernel::MemoryKernel(KernelFamily f, std::vector<double> params)
    : family_(f), params_(std::move(params)) {
  for (double p : params_) {
    if (!std::isfinite(p)) throw ValidationError("kernel: non-finite parameter");
  }
}

MemoryKernel MemoryKernel::constant(double kappa) {
  return MemoryKernel(KernelFamily::constant, {kappa});
}

MemoryKernel MemoryKernel::exponential(double amplitude, double decay) {
  return MemoryKernel(KernelFamily::exponential, {amplitude, decay});
}

MemoryKernel MemoryKernel::gaussian(double amplitude, double width, double center) {
  if (!(width > 0.0)) throw ValidationError("gaussian kernel: width must be > 0");
  return MemoryKernel(KernelFamily::gaussian, {amplitude, width, center});
}

MemoryKernel MemoryKernel::markov_delta() { return MemoryKernel(KernelFamily::markov_delta, {}); }

MemoryKernel MemoryKernel::tabulated(TabulatedKernel table) {
  MemoryKernel k(KernelFamily::tabulated, {});
  k.table_ = std::make_shared<const TabulatedKernel>(std::move(table));
  return k;
}

std::string MemoryKernel::describe() const {
  std::ostringstream os;
  os << to_string(family_);
  if (!params_.empty()) {
    os << "(";
    for (std::size_t k = 0; k < params_.size(); ++k) os << (k ? ", " : "") << params_[k];
    os << ")";
  }
  return os.str();
}

double MemoryKernel::operator()(double t, double s) const {
  const double tau = t - s;
  switch (family_) {
    case KernelFamily::constant: return params_[0];
    case KernelFamily::exponential: return params_[0] * std::exp(-params_[1] * tau);
    case KernelFamily::gaussian: {
      const double z = (tau - params_[2]) / params_[1];
      return params_[0] * std::exp(-0.5 * z * z);
    }
    case KernelFamily::tabulated: return (*table_)(t, s);
    case KernelFamily::markov_delta: break;
  }
  throw ValidationError("markov_delta kernel has no pointwise value");
}

TimeGrid::TimeGrid(double t_max, std::size_t n_points) : t_max_(t_max), n_(n_points) {
  if (n_points < 2) throw ValidationError("time grid: n_points must be >= 2");
  if (!(t_max > 0.0) || !std::isfinite(t_max)) {
    throw ValidationError("time grid: t_max must be a finite positive number");
  }
}

std::size_t TimeGrid::node_of(double t) const {
  const double x = t / dt();
  const double r = std::round(x);
  if (r < 0 || r > static_cast<double>(n_ - 1) || std::abs(x - r) > 1e-9) {
    std::ostringstream os;
    os << "time " << t << " is not a node of the grid [0, " << t_max_ << "] with " << n_
       << " points";
    throw ValidationError(os.str());
  }
  return static_cast<std::size_t>(r);
}

KernelIntegrals::KernelIntegrals(TimeGrid grid, std::vector<double> packed,
                                 bool kernel_nonnegative)
    : grid_(grid), packed_(std::move(packed)), kernel_nonnegative_(kernel_nonnegative) {
  const std::size_t n = grid_.size();
  if (packed_.size() != n * (n + 1) / 2) {
    throw ValidationError("kernel integrals: packed table size mismatch");
  }
  for (double v : packed_) {
    if (!std::isfinite(v)) throw NumericError("kernel integrals: non-finite table entry");
    raw_max_ = std::max(raw_max_, std::abs(v));
  }
}

KernelIntegrals KernelIntegrals::scaled(double factor) const {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw ValidationError("kernel integrals: scale factor must be finite and positive");
  }
  KernelIntegrals out = *this;
  out.scale_ = scale_ * factor;
  return out;
}

double KernelIntegrals::row_integral(std::size_t j) const {
  if (j == 0) return 0.0;
  const double dt = grid_.dt();
  double acc = 0.5 * (raw(j, 0) + raw(j, j));
  for (std::size_t m = 1; m < j; ++m) acc += raw(j, m);
  return scale_ * dt * acc;
}

double KernelIntegrals::worst_column_decrease() const {
  double worst = 0.0;
  for (std::size_t m = 0; m < grid_.size(); ++m) {
    for (std::size_t j = m + 1; j < grid_.size(); ++j) {
      worst = std::min(worst, raw(j, m) - raw(j - 1, m));
    }
  }
  return scale_ * worst;
}

NestedCoefficients::NestedCoefficients(TimeGrid grid, int order, double scale,
                                       std::vector<double> values)
    : grid_(grid), order_(order), scale_(scale), values_(std::move(values)) {
  if (values_.size() != static_cast<std::size_t>(order_ + 1) * grid_.size()) {
    throw ValidationError("nested coefficients: table size mismatch");
  }
}

double NestedCoefficients::operator()(int i, std::size_t j) const {
  return raw(i, j) * std::pow(scale_, i);
}

KernelIntegrals integrate_kernel(const MemoryKernel& kernel, const TimeGrid& grid) {
  const std::size_t n = grid.size();
  std::vector<double> packed(n * (n + 1) / 2, 0.0);
  if (kernel.is_delta()) {
    // int_s^t 2 delta(tau - s) dtau = 1 with half the mass at the endpoint;
    // the diagonal carries the s -> t^- limit so the Volterra integrand is 1 on [0, t].
    std::fill(packed.begin(), packed.end(), 1.0);
    return KernelIntegrals(grid, std::move(packed), true);
  }
  const double dt = grid.dt();
  bool nonnegative = true;
  std::vector<double> column(n);
  for (std::size_t m = 0; m < n; ++m) {
    const double s = grid.time(m);
    for (std::size_t j = m; j < n; ++j) {
      const double v = kernel(grid.time(j), s);
      if (!std::isfinite(v)) {
        std::ostringstream os;
        os << "kernel " << kernel.describe() << " is not finite at t=" << grid.time(j)
           << ", s=" << s;
        throw NumericError(os.str());
      }
      if (v < 0.0) nonnegative = false;
      column[j] = v;
    }
    double acc = 0.0;
    packed[m * (m + 1) / 2 + m] = 0.0;
    for (std::size_t j = m + 1; j < n; ++j) {
      acc += 0.5 * dt * (column[j - 1] + column[j]);
      packed[j * (j + 1) / 2 + m] = acc;
    }
  }
  return KernelIntegrals(grid, std::move(packed), nonnegative);
}

NestedCoefficients nested_coefficients(const KernelIntegrals& h, int order) {
  const std::vector<double> ones(h.grid().size(), 1.0);
  return nested_coefficients(h, order, ones);
}

NestedCoefficients nested_coefficients(const KernelIntegrals& h, int order,
                                       std::span<const double> seed) {
  if (order < 0) throw ValidationError("nested coefficients: order must be >= 0");
  const std::size_t n = h.grid().size();
  if (seed.size() != n) throw ValidationError("nested coefficients: seed length mismatch");
  const double dt = h.grid().dt();
  std::vector<double> values(static_cast<std::size_t>(order + 1) * n, 0.0);
  std::copy(seed.begin(), seed.end(), values.begin());
  for (int i = 1; i <= order; ++i) {
    const double* prev = values.data() + static_cast<std::size_t>(i - 1) * n;
    double* cur = values.data() + static_cast<std::size_t>(i) * n;
    cur[0] = 0.0;
    for (std::size_t j = 1; j < n; ++j) {
      double acc = 0.5 * (h.raw(j, 0) * prev[0] + h.raw(j, j) * prev[j]);
      for (std::size_t m = 1; m < j; ++m) acc += h.raw(j, m) * prev[m];
      cur[j] = dt * acc;
    }
  }
  return NestedCoefficients(h.grid(), order, h.scale(), std::move(values));
}

}  // namespace memsim
