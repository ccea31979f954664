#ifndef SLOWBOND_FIELD_HPP
#define SLOWBOND_FIELD_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "slowbond/model.hpp"

namespace slowbond {

/// Real values on (time grid) x (ring sites), row-major in time.
struct Field {
  std::vector<double> times;
  int W = 0;
  std::vector<double> data;

  Field() = default;
  Field(std::vector<double> t, int w) : times(std::move(t)), W(w), data(times.size() * w, 0.0) {}

  std::size_t nt() const { return times.size(); }
  double& operator()(std::size_t t, int i) { return data[t * W + i]; }
  double operator()(std::size_t t, int i) const { return data[t * W + i]; }
  double* row(std::size_t t) { return data.data() + t * W; }
  const double* row(std::size_t t) const { return data.data() + t * W; }
};

/// sup over the grid of exp(-kappa |x| / N) |f|.
inline double weighted_sup_norm(const Field& f, int N, double kappa) {
  Ring ring(f.W);
  double best = 0.0;
  for (std::size_t t = 0; t < f.nt(); ++t)
    for (int i = 0; i < f.W; ++i) {
      double w = kappa == 0.0 ? 1.0 : std::exp(-kappa * std::abs(ring.site(i)) / N);
      best = std::max(best, w * std::abs(f(t, i)));
    }
  return best;
}

inline Field difference(const Field& a, const Field& b) {
  Field d(a.times, a.W);
  for (std::size_t k = 0; k < a.data.size(); ++k) d.data[k] = a.data[k] - b.data[k];
  return d;
}

/// max |a - b| / |b| over the grid.
inline double max_relative_gap(const Field& a, const Field& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.data.size(); ++k)
    m = std::max(m, std::abs(a.data[k] - b.data[k]) / std::abs(b.data[k]));
  return m;
}

}  // namespace slowbond

#endif
