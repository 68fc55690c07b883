#include <cmath>

#include "doctest.h"
#include "qfup/classical.hpp"
#include "qfup/errors.hpp"
#include "qfup/smearing.hpp"

using namespace qfup;

namespace {

SmearingFunction bump(double t, double x, double hw = 0.4, double amp = 1.0,
                      BumpKind kind = BumpKind::cosine_bump) {
  return SmearingFunction{BumpSpec{{t, x}, hw, amp, kind}};
}

}  // namespace

TEST_CASE("pointwise commutator kernel: support, sign, and Bessel profile") {
  DeltaKernel m0{0.0}, m1{1.0};

  // strictly spacelike separations give exact zero, both masses
  for (auto [t, x] : {std::pair{0.3, 1.0}, {-0.5, 0.7}, {0.0, 0.01}}) {
    CHECK(pauli_jordan_point(m0, {t, x}, {0, 0}) == 0.0);
    CHECK(pauli_jordan_point(m1, {t, x}, {0, 0}) == 0.0);
  }

  // massless kernel is a signed step inside the cone
  CHECK(pauli_jordan_point(m0, {2.0, 0.5}, {0, 0}) == 0.5);
  CHECK(pauli_jordan_point(m0, {-2.0, 0.5}, {0, 0}) == -0.5);

  // massive kernel carries a Bessel profile of the proper-time interval
  for (auto [t, x] : {std::pair{1.0, 0.0}, {2.5, 1.2}, {4.0, -3.0}}) {
    const double tau = std::sqrt(t * t - x * x);
    const double want = 0.5 * std::cyl_bessel_j(0, tau);
    CHECK(pauli_jordan_point(m1, {t, x}, {0, 0}) ==
          doctest::Approx(want).epsilon(1e-13));
    CHECK(pauli_jordan_point(m1, {-t, x}, {0, 0}) ==
          doctest::Approx(-want).epsilon(1e-13));
  }

  // translation invariance: only the difference enters
  CHECK(pauli_jordan_point(m1, {3.0, 1.0}, {1.0, 0.5}) ==
        pauli_jordan_point(m1, {2.0, 0.5}, {0.0, 0.0}));

  // antisymmetry under swapping the two points
  CHECK(pauli_jordan_point(m1, {0, 0}, {2.0, 0.5}) ==
        -pauli_jordan_point(m1, {2.0, 0.5}, {0, 0}));

  // cone boundary takes the inside (Bessel at zero argument) value
  CHECK(pauli_jordan_point(m1, {1.0, 1.0}, {0, 0}) == 0.5);
  CHECK(pauli_jordan_point(m1, {0.0, 0.0}, {0, 0}) == 0.5);
}

TEST_CASE("smeared pairing: spacelike zero and exact antisymmetry") {
  QuadratureConfig q;
  // squares at equal time, two units apart: strictly spacelike since the
  // gap 1.2 exceeds the largest time offset 0.8
  auto f = bump(0.0, 0.0), g = bump(0.0, 2.0);
  CHECK(delta_bilinear(f, g, DeltaKernel{1.0}, q) == 0.0);

  auto h = bump(1.5, 0.3, 0.35);  // timelike-overlapping pair
  const double d1 = delta_bilinear(f, h, DeltaKernel{1.0}, q);
  const double d2 = delta_bilinear(h, f, DeltaKernel{1.0}, q);
  CHECK(d1 != 0.0);
  CHECK(d2 == -d1);  // canonical argument order makes the swap exact
}

TEST_CASE("smeared pairing agrees with the lattice oracle") {
  // early narrow source against a later bump; oracle integrates the second
  // function against the wave solution generated by the first
  auto f = bump(0.0, 0.0), g = bump(1.5, 1.8);
  const double mass = 1.0;
  QuadratureConfig q;
  const double dq = delta_bilinear(f, g, DeltaKernel{mass}, q);

  const double dx = 0.02;
  Rect win{-1.0, 3.0, -4.0, 7.0};
  const double dl = lattice_delta(f, g, mass, make_lattice(win, dx, dx));
  CHECK(dq != 0.0);
  CHECK(std::fabs(dl - dq) / std::fabs(dq) < 0.02);
}

TEST_CASE("quadrature refinement converges at second order or better") {
  // truncated-Gaussian bumps have an edge discontinuity in the profile's
  // derivative, holding the midpoint ladder near order two
  auto f = bump(0.0, 0.0, 0.4, 1.0, BumpKind::truncated_gaussian);
  auto g = bump(1.5, 1.8, 0.4, 1.0, BumpKind::truncated_gaussian);
  const DeltaKernel k{1.0};

  QuadratureConfig fine;
  fine.dx = 0.004;
  fine.tol = 1e-12;
  fine.levels = 3;
  double ref;
  try {
    ref = delta_bilinear(f, g, k, fine);
  } catch (const ConvergenceError& e) {
    ref = e.last;  // finest level is accurate enough for a slope reference
  }

  double prev_err = 0.0;
  int checked = 0;
  for (double dx : {0.1, 0.05, 0.025}) {
    QuadratureConfig one;
    one.dx = dx;
    one.levels = 1;
    one.tol = 1e-30;
    double val;
    try {
      val = delta_bilinear(f, g, k, one);
    } catch (const ConvergenceError& e) {
      val = e.last;
    }
    const double err = std::fabs(val - ref);
    if (checked > 0 && err > 0.0 && prev_err > 0.0) {
      const double slope = std::log2(prev_err / err);
      CHECK(slope > 1.5);
      CHECK(slope < 4.5);
    }
    prev_err = err;
    ++checked;
  }
}

TEST_CASE("refinement failure reports the last two levels") {
  auto f = bump(0.0, 0.0), g = bump(1.5, 1.8);
  QuadratureConfig q;
  q.levels = 2;
  q.tol = 1e-30;  // unreachable
  bool threw = false;
  try {
    delta_bilinear(f, g, DeltaKernel{1.0}, q);
  } catch (const ConvergenceError& e) {
    threw = true;
    CHECK(e.previous != 0.0);
    CHECK(e.last != 0.0);
    CHECK(e.previous != e.last);
    // the two levels already agree to a few percent
    CHECK(std::fabs(e.previous - e.last) / std::fabs(e.last) < 0.1);
  }
  CHECK(threw);
}

TEST_CASE("two sampled functions use one fixed grid and never throw") {
  // sample a bump onto its own grid, pair it with another sampled bump
  auto sample = [](const BumpSpec& b, double h) {
    SampledFunction s;
    s.h = h;
    s.t0 = b.center.t - b.half_width;
    s.x0 = b.center.x - b.half_width;
    s.nt = (int)std::lround(2 * b.half_width / h) + 1;
    s.nx = s.nt;
    s.values.resize((size_t)s.nt * s.nx);
    for (int i = 0; i < s.nt; ++i)
      for (int j = 0; j < s.nx; ++j)
        s.at(i, j) = eval_bump(b, s.node(i, j));
    return SmearingFunction{s};
  };
  BumpSpec bf{{0.0, 0.0}, 0.4, 1.0, BumpKind::cosine_bump};
  BumpSpec bg{{1.5, 1.8}, 0.4, 1.0, BumpKind::cosine_bump};
  auto fs = sample(bf, 0.02), gs = sample(bg, 0.02);
  QuadratureConfig q;
  q.levels = 1;  // would throw for refinable inputs at tol 0
  q.tol = 0.0;
  const double d = delta_bilinear(fs, gs, DeltaKernel{1.0}, q);
  // value agrees with the analytic-bump pairing to quadrature accuracy
  QuadratureConfig qq;
  const double dq =
      delta_bilinear(SmearingFunction{bf}, SmearingFunction{bg},
                     DeltaKernel{1.0}, qq);
  CHECK(std::fabs(d - dq) / std::fabs(dq) < 0.02);
}

TEST_CASE("vacuum two-point pairing: positivity, symmetry, and guards") {
  QuadratureConfig q;
  auto g = bump(0.0, 0.0);
  const double wgg = vacuum_covariance(g, g, 1.0, q);
  CHECK(wgg > 0.0);

  auto g2 = bump(0.9, 0.2);
  const double w12 = vacuum_covariance(g, g2, 1.0, q);
  const double w21 = vacuum_covariance(g2, g, 1.0, q);
  CHECK(w12 == doctest::Approx(w21).epsilon(1e-12));

  // self-pairings of identical translated bumps agree bit for bit: the
  // phase factors cancel inside the squared magnitude
  CHECK(vacuum_covariance(g2, g2, 1.0, q) == wgg);

  // translated pairs keep the value to rounding: only the separation enters
  auto ga = bump(5.0, -3.0), gb = bump(5.9, -2.8);
  CHECK(vacuum_covariance(ga, gb, 1.0, q) ==
        doctest::Approx(w12).epsilon(1e-12));

  CHECK_THROWS_AS(vacuum_covariance(g, g, 0.0, q), Error);
  CHECK_THROWS_AS(vacuum_covariance(g, g, -1.0, q), Error);
}

TEST_CASE("vacuum detail exposes the commutator as its imaginary part") {
  QuadratureConfig q;
  auto f = bump(0.0, 0.0), g = bump(1.5, 1.8);
  const VacuumResult r = vacuum_covariance_detail(f, g, 1.0, q);
  const double d = delta_bilinear(f, g, DeltaKernel{1.0}, q);
  CHECK(r.imag_part == doctest::Approx(0.5 * d).epsilon(1e-5));
  CHECK(r.tail_bound >= 0.0);
  CHECK(r.tail_bound < 1e-8);
  CHECK(r.kmax == doctest::Approx(q.kmax));
  CHECK(r.nodes > 0);
  CHECK(r.value == vacuum_covariance(f, g, 1.0, q));
}

TEST_CASE("pairing table caches values and validates its state block") {
  QuadratureConfig q;
  PairingTable t(1.0, q);
  const int a = t.add("f", bump(0.0, 0.0));
  const int b = t.add("g", bump(1.5, 1.8));
  const int c = t.add("s", bump(0.0, 2.0));
  CHECK(t.size() == 3);
  CHECK(t.find("g") == b);
  CHECK(t.find("nope") == -1);
  CHECK(t.name(c) == "s");
  CHECK_THROWS_AS(t.add("f", bump(1, 1)), Error);  // duplicate name

  t.build(true);
  CHECK(t.built());
  CHECK(t.has_covariance());
  CHECK(t.delta(a, b) == -t.delta(b, a));
  CHECK(t.delta(a, a) == 0.0);
  CHECK(t.delta(a, c) == 0.0);  // spacelike pair
  CHECK(t.delta(a, b) == doctest::Approx(
            delta_bilinear(t.function(a), t.function(b), DeltaKernel{1.0}, q)));
  CHECK(t.covariance(a, a) > 0.0);
  CHECK(t.covariance(a, b) == t.covariance(b, a));
  CHECK(t.delta_scale() >= 1.0);
}

TEST_CASE("injected backends are honored and indefinite data rejected") {
  QuadratureConfig q;
  PairingTable t(1.0, q);
  t.add("a", bump(0, 0));
  t.add("b", bump(0, 3));
  PairingTable::PairFn dz = [](const SmearingFunction&,
                               const SmearingFunction&) { return 0.0; };
  // covariance matrix [[1, 5], [5, 1]] is indefinite; building must refuse
  PairingTable::PairFn bad = [](const SmearingFunction& x,
                                const SmearingFunction& y) {
    return x.support().t_lo == y.support().t_lo &&
                   x.support().x_lo == y.support().x_lo
               ? 1.0
               : 5.0;
  };
  CHECK_THROWS_AS(t.build_with(dz, &bad), Error);

  PairingTable t2(1.0, q);
  t2.add("a", bump(0, 0));
  t2.add("b", bump(0, 3));
  PairingTable::PairFn good = [](const SmearingFunction& x,
                                 const SmearingFunction& y) {
    return x.support().x_lo == y.support().x_lo ? 1.0 : 0.25;
  };
  t2.build_with(dz, &good);
  CHECK(t2.delta(0, 1) == 0.0);
  CHECK(t2.covariance(0, 1) == 0.25);
  CHECK(t2.covariance(0, 0) == 1.0);
}
