#pragma once

// Minimal complex vector / matrix arithmetic in WideReal, split into real
// and imaginary parts. Only what the series assembly needs.

#include <vector>

#include "memsim/linalg.hpp"
#include "memsim/wide_real.hpp"

namespace memsim::detail {

struct WideVector {
  std::vector<WideReal> re, im;

  explicit WideVector(std::size_t n = 0) : re(n), im(n) {}
  std::size_t size() const { return re.size(); }

  static WideVector from(const ComplexVector& v) {
    WideVector w(static_cast<std::size_t>(v.size()));
    for (std::size_t k = 0; k < w.size(); ++k) {
      w.re[k] = v(static_cast<Eigen::Index>(k)).real();
      w.im[k] = v(static_cast<Eigen::Index>(k)).imag();
    }
    return w;
  }

  ComplexVector to_double() const {
    ComplexVector v(static_cast<Eigen::Index>(size()));
    for (std::size_t k = 0; k < size(); ++k) {
      v(static_cast<Eigen::Index>(k)) = Complex(memsim::to_double(re[k]), memsim::to_double(im[k]));
    }
    return v;
  }

  // y += a * x
  void axpy(const WideReal& a, const WideVector& x) {
    if (a == 0) return;
    for (std::size_t k = 0; k < size(); ++k) {
      re[k] += a * x.re[k];
      im[k] += a * x.im[k];
    }
  }

  WideVector scaled(const WideReal& a) const {
    WideVector out(size());
    for (std::size_t k = 0; k < size(); ++k) {
      out.re[k] = a * re[k];
      out.im[k] = a * im[k];
    }
    return out;
  }

  WideVector operator-(const WideVector& o) const {
    WideVector out(size());
    for (std::size_t k = 0; k < size(); ++k) {
      out.re[k] = re[k] - o.re[k];
      out.im[k] = im[k] - o.im[k];
    }
    return out;
  }

  WideVector operator+(const WideVector& o) const {
    WideVector out(size());
    for (std::size_t k = 0; k < size(); ++k) {
      out.re[k] = re[k] + o.re[k];
      out.im[k] = im[k] + o.im[k];
    }
    return out;
  }

  /// Trace of the d x d matrix this vector column-stacks.
  WideReal trace_re(int dim) const {
    WideReal acc = 0;
    for (int k = 0; k < dim; ++k) acc += re[static_cast<std::size_t>(k * (dim + 1))];
    return acc;
  }

  double max_abs() const {
    WideReal best = 0;
    for (std::size_t k = 0; k < size(); ++k) {
      best = std::max(best, boost::multiprecision::abs(re[k]));
      best = std::max(best, boost::multiprecision::abs(im[k]));
    }
    return memsim::to_double(best);
  }
};

struct WideMatrix {
  std::size_t n = 0;
  std::vector<WideReal> re, im;  // row-major

  static WideMatrix from(const ComplexMatrix& m) {
    WideMatrix w;
    w.n = static_cast<std::size_t>(m.rows());
    w.re.resize(w.n * w.n);
    w.im.resize(w.n * w.n);
    for (std::size_t i = 0; i < w.n; ++i) {
      for (std::size_t j = 0; j < w.n; ++j) {
        const Complex z = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        w.re[i * w.n + j] = z.real();
        w.im[i * w.n + j] = z.imag();
      }
    }
    return w;
  }

  WideVector apply(const WideVector& x) const {
    WideVector y(n);
    for (std::size_t i = 0; i < n; ++i) {
      WideReal ar = 0, ai = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const WideReal& mr = re[i * n + j];
        const WideReal& mi = im[i * n + j];
        if (mr == 0 && mi == 0) continue;
        ar += mr * x.re[j] - mi * x.im[j];
        ai += mr * x.im[j] + mi * x.re[j];
      }
      y.re[i] = std::move(ar);
      y.im[i] = std::move(ai);
    }
    return y;
  }
};

}  // namespace memsim::detail
