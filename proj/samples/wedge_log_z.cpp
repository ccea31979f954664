// Narrow-wedge runs with and without a slow bond at the origin, sharing random numbers,
// and the unit-mass log Z at the origin at the final time.

#include <cstdio>

#include "slowbond/slowbond.hpp"

using namespace slowbond;

int main() {
  const int N = 32;
  const int W = 8 * N + 1;
  RunOptions opt;
  opt.t_final = 0.5;
  opt.snapshot_dt = 0.05;
  opt.sampler = Sampler::Graphical;
  Ring ring(W);

  for (double beta : {0.0, 0.1}) {
    RawParams raw;
    raw.N = N;
    raw.beta_star = beta;
    raw.window = W;
    raw.slow_bonds = {0};
    auto k = derive_constants(validate_params(raw));
    auto logs = orchestrate_ensemble(20, 7, 1, [&](long, Rng& rng) {
      auto r = run(init_config(InitKind::NarrowWedge, ring, rng), k, opt, rng);
      auto ch = build_ch_field(r.traj, k);
      return micro_log_z(ch.Z, ch.Z.nt() - 1, ring.index(0), N, Normalization::UnitMass, InitKind::NarrowWedge);
    });
    std::printf("beta %.2f  mean log Z(0.5, 0) = %.4f +- %.4f\n", beta, mean(logs), std_error(logs));
  }
}
