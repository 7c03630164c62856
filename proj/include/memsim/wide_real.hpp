#pragma once

#include <boost/multiprecision/cpp_bin_float.hpp>

namespace memsim {

/// Working precision for the alternating coefficient sums c_i and the
/// split C+/C- weights. In the memory-approximation regime (small lambda)
/// |c_i| grows far beyond 1/epsilon_double while sum c_i E^i stays O(1),
/// so these sums are carried in 300 decimal digits.
using WideReal =
    boost::multiprecision::number<boost::multiprecision::cpp_bin_float<300>,
                                  boost::multiprecision::et_off>;

inline constexpr int kWideDigits10 = 300;

inline double to_double(const WideReal& x) { return x.convert_to<double>(); }

}  // namespace memsim
