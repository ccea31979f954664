// Kernel of the inhomogeneous walk against the constant-rate kernel, for a few N at fixed
// macroscopic time.

#include <cstdio>

#include "slowbond/slowbond.hpp"

using namespace slowbond;

int main() {
  const double t = 0.05;
  for (int N : {16, 32, 64}) {
    RawParams raw;
    raw.N = N;
    raw.beta_star = 0.1;
    raw.window = wrap_safe_window(N, t);
    raw.slow_bonds = {0};
    auto p = validate_params(raw);
    auto k = derive_constants(p);
    auto P = solve_kernel(k, 0.0, t);
    auto B = homogeneous_kernel(k, 0.0, t);
    auto g = perturbative_gap(P, B, p, build_schedule(p, 0.01, 0.01));
    std::printf("N %3d  W %4d  row-sum dev %.2e  N sup|P - Pbar| = %.5f\n", N, p.window,
                max_row_sum_deviation(P.P), N * g.sup_all);
  }
}
