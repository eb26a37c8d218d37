// Relaxation of the slowed heat flow on the circle: measures the decay rate
// of the first Fourier mode from replica ensembles and compares it with the
// analytic spectral gap (1 - cos(2 pi / n)) / n.

#include <cstdio>

#include "liftlab/liftlab.hpp"

using namespace liftlab;

int main() {
  std::printf("%4s  %12s  %12s  %8s\n", "n", "measured", "analytic", "ratio");
  bool ok = true;
  for (int n : {8, 16, 24, 32}) {
    double gap = collapse_gap(CircleLattice(n));
    RelaxationEstimate est = estimate_relaxation(
        sampler_ou(n), Observable::fourier_mode(1), 4096, 12.0 / gap, 2026);
    if (est.failed) {
      std::printf("%4d  estimation failed: %s\n", n, est.diagnostics.c_str());
      ok = false;
      continue;
    }
    double ratio = est.rate / gap;
    std::printf("%4d  %12.6g  %12.6g  %8.4f\n", n, est.rate, gap, ratio);
    ok = ok && ratio > 0.85 && ratio < 1.15;
  }
  std::printf("%s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}
