// Timing comparison of the serial reference paths against the OpenMP
// kernels: smeared pairings, vacuum covariances, lattice evolution, and
// outcome sampling. Both paths produce bit-identical values; the check is
// asserted here before timings are reported.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "qfup/classical.hpp"
#include "qfup/sampler.hpp"
#include "qfup/smearing.hpp"

using namespace qfup;

namespace {

double now() {
#ifdef _OPENMP
  return omp_get_wtime();
#else
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
#endif
}

template <class F>
double time_best(const F& f, int reps) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const double t0 = now();
    f();
    best = std::min(best, now() - t0);
  }
  return best;
}

void report(const char* name, double serial, double parallel, bool same) {
  std::printf("%-28s %10.4f s %10.4f s %8.2fx   %s\n", name, serial, parallel,
              serial / parallel, same ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  int reps = 3;
  if (argc > 1) reps = std::atoi(argv[1]);
  if (reps < 1) reps = 1;

#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (OpenMP disabled)\n");
#endif
  std::printf("%-28s %12s %12s %9s\n", "kernel", "serial", "parallel",
              "speedup");

  const double mass = 1.0;
  QuadratureConfig quad;
  quad.dx = 0.02;  // finer than the default so the kernels have real work
  quad.levels = 4;

  const SmearingFunction f(BumpSpec{{1.5, 1.8}, 0.4, 1.0});
  const SmearingFunction g(BumpSpec{{2.0, 3.8}, 0.4, 1.0});
  const DeltaKernel kernel{mass};

  {
    double vs = 0.0, vp = 0.0;
    const double ts = time_best(
        [&] { vs = delta_bilinear(f, g, kernel, quad, ExecPolicy::serial); },
        reps);
    const double tp = time_best(
        [&] { vp = delta_bilinear(f, g, kernel, quad, ExecPolicy::parallel); },
        reps);
    report("smeared pairing", ts, tp, vs == vp);
  }

  {
    QuadratureConfig vq = quad;
    vq.tol = 1e-9;
    double vs = 0.0, vp = 0.0;
    const double ts = time_best(
        [&] { vs = vacuum_covariance(f, g, mass, vq, ExecPolicy::serial); },
        reps);
    const double tp = time_best(
        [&] { vp = vacuum_covariance(f, g, mass, vq, ExecPolicy::parallel); },
        reps);
    report("vacuum covariance", ts, tp, vs == vp);
  }

  {
    const Lattice lat = make_lattice({-1.0, 5.0, -4.0, 9.0}, 0.01);
    LatticeField a, b;
    const double ts = time_best(
        [&] { a = generate_solution(f, mass, lat, ExecPolicy::serial); },
        reps);
    const double tp = time_best(
        [&] { b = generate_solution(f, mass, lat, ExecPolicy::parallel); },
        reps);
    report("lattice evolution", ts, tp, a.values == b.values);
  }

  {
    PairingTable table(mass, quad);
    table.add("f", f);
    table.add("g", g);
    table.build(true);
    const GaussianState state{&table};
    MeasurementPlan plan;
    plan.entries = {{0, 1.0}, {1, 1.0}};
    plan.convention = CompositionConvention::jordan_symmetrized;
    OutcomeBatch a, b;
    const double ts = time_best(
        [&] {
          a = sample_measurements(plan, state, 2000000, 7, false,
                                  ExecPolicy::serial);
        },
        reps);
    const double tp = time_best(
        [&] {
          b = sample_measurements(plan, state, 2000000, 7, false,
                                  ExecPolicy::parallel);
        },
        reps);
    report("outcome sampling", ts, tp, a.outcomes == b.outcomes);
  }
  return 0;
}
