#ifndef SLOWBOND_BESSEL_HPP
#define SLOWBOND_BESSEL_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

namespace slowbond {

/// e^{-x} I_n(x) for n = 0..n_max, by Miller's backward recurrence normalised with
/// e^{-x} (I_0 + 2 sum_{k>=1} I_k) = 1. Stable for any x >= 0 without overflow.
inline std::vector<double> scaled_bessel_i(double x, int n_max) {
  if (x < 0.0 || n_max < 0) throw std::invalid_argument("scaled_bessel_i: need x >= 0, n_max >= 0");
  std::vector<double> out(n_max + 1, 0.0);
  if (x == 0.0) {
    out[0] = 1.0;
    return out;
  }
  // start far enough beyond both n_max and the bulk of the sequence (width ~ sqrt x)
  int start = n_max + static_cast<int>(std::ceil(12.0 * std::sqrt(x) + 60.0));
  double next = 0.0, cur = 1e-280, sum = 0.0;
  for (int k = start; k >= 1; --k) {
    double prev = cur * (2.0 * k / x) + next;  // I_{k-1}
    if (k <= n_max) out[k] = cur;
    sum += cur;
    next = cur;
    cur = prev;
    if (cur > 1e250) {
      const double s = 1e-250;
      cur *= s;
      next *= s;
      sum *= s;
      for (int j = k; j <= n_max; ++j) out[j] *= s;
    }
  }
  out[0] = cur;
  double norm = cur + 2.0 * sum;
  for (auto& v : out) v /= norm;
  return out;
}

}  // namespace slowbond

#endif
