#include <cmath>
#include <cstdio>
#include <sstream>

#include "doctest.h"
#include "qfup/functions.hpp"

using namespace qfup;

TEST_CASE("eval_bump peak, support edge, and outside behaviour") {
  BumpSpec cos2{{1.0, -2.0}, 0.5, 3.0, BumpKind::cosine_bump};
  CHECK(eval_bump(cos2, {1.0, -2.0}) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(eval_bump(cos2, {1.0, -2.0 + 0.5}) == 0.0);  // edge value exact zero
  CHECK(eval_bump(cos2, {1.6, -2.0}) == 0.0);        // outside exact zero
  CHECK(eval_bump(cos2, {1.0, -1.4}) == 0.0);

  BumpSpec tg{{0.0, 0.0}, 1.0, 2.0, BumpKind::truncated_gaussian};
  CHECK(eval_bump(tg, {0.0, 0.0}) == doctest::Approx(2.0).epsilon(1e-15));
  // per-axis profile is exp(-4.5 u^2) on [-1, 1]: finite jump at the edge
  const double edge = eval_bump(tg, {0.0, 1.0 - 1e-12});
  CHECK(edge > 0.5 * 2.0 * std::exp(-4.5));
  CHECK(eval_bump(tg, {0.0, 1.0 + 1e-12}) == 0.0);
}

TEST_CASE("cosine bump profile is separable with quadratic edge decay") {
  BumpSpec b{{0.0, 0.0}, 2.0, 1.0, BumpKind::cosine_bump};
  auto prof = [&](double u) {  // per-axis profile at scaled coordinate u
    const double c = std::cos(0.5 * M_PI * u);
    return c * c;
  };
  for (double ut : {0.0, 0.3, -0.7, 0.95})
    for (double ux : {0.0, -0.2, 0.5, 0.99}) {
      const double got = eval_bump(b, {2.0 * ut, 2.0 * ux});
      CHECK(got == doctest::Approx(prof(ut) * prof(ux)).epsilon(1e-13));
    }
  // near the edge the profile falls like (pi eps / 2)^2 in scaled units
  const double eps = 1e-5;
  const double near = eval_bump(b, {0.0, 2.0 * (1.0 - eps)});
  const double expect = std::pow(0.5 * M_PI * eps, 2.0);
  CHECK(near == doctest::Approx(expect).epsilon(1e-4));
}

TEST_CASE("sampled function round trip is bit exact") {
  SampledFunction f;
  f.t0 = -1.25;
  f.x0 = 0.375;
  f.h = 0.01;
  f.nt = 7;
  f.nx = 5;
  f.values.resize((size_t)f.nt * f.nx);
  // awkward values: subnormal-ish, negative, irrational-looking
  for (int i = 0; i < f.nt; ++i)
    for (int j = 0; j < f.nx; ++j)
      f.at(i, j) = std::sin(1e3 * i + j) * std::pow(10.0, j - 2) +
                   (i == 3 ? 1e-300 : 0.0);

  std::stringstream ss;
  write_sampled(ss, f);
  SampledFunction g = read_sampled(ss);
  REQUIRE(g.same_grid(f));
  for (size_t k = 0; k < f.values.size(); ++k) CHECK(g.values[k] == f.values[k]);

  const std::string path = "/tmp/qfup_roundtrip_test.sf";
  write_sampled_file(path, f);
  SampledFunction g2 = read_sampled_file(path);
  REQUIRE(g2.same_grid(f));
  for (size_t k = 0; k < f.values.size(); ++k)
    CHECK(g2.values[k] == f.values[k]);
  std::remove(path.c_str());
}

TEST_CASE("smearing_value interpolates sampled grids") {
  SampledFunction f;
  f.t0 = 0.0;
  f.x0 = 10.0;
  f.h = 0.25;
  f.nt = 4;
  f.nx = 3;
  f.values = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  SmearingFunction sf{f};

  // node-exact everywhere, including the last row and column
  for (int i = 0; i < f.nt; ++i)
    for (int j = 0; j < f.nx; ++j)
      CHECK(smearing_value(sf, f.node(i, j)) == doctest::Approx(f.at(i, j)));

  // cell-center value is the average of the four corners
  const Point mid{f.t0 + 0.5 * f.h, f.x0 + 0.5 * f.h};
  CHECK(smearing_value(sf, mid) ==
        doctest::Approx(0.25 * (1 + 2 + 4 + 5)).epsilon(1e-14));

  // off the grid it vanishes
  CHECK(smearing_value(sf, {f.t0 - 1e-9, 10.1}) == 0.0);
  CHECK(smearing_value(sf, {0.1, 10.0 + 2 * 0.25 + 1e-9}) == 0.0);

  const Rect s = sf.support();
  CHECK(s.t_hi == doctest::Approx(0.75));
  CHECK(s.x_hi == doctest::Approx(10.5));
}

TEST_CASE("smearing_value on bumps matches eval_bump") {
  BumpSpec b{{0.5, 0.5}, 0.4, 2.5, BumpKind::truncated_gaussian};
  SmearingFunction sf{b};
  CHECK(sf.is_bump());
  for (double t : {0.2, 0.5, 0.8})
    for (double x : {0.3, 0.5, 0.7})
      CHECK(smearing_value(sf, {t, x}) == eval_bump(b, {t, x}));
}

TEST_CASE("scaled multiplies values pointwise and keeps the support") {
  BumpSpec b{{0.0, 0.0}, 1.0, 1.5, BumpKind::cosine_bump};
  SmearingFunction sf{b};
  SmearingFunction s2 = sf.scaled(-2.0);
  for (double t : {0.0, 0.3, 0.9})
    CHECK(smearing_value(s2, {t, 0.1}) ==
          doctest::Approx(-2.0 * smearing_value(sf, {t, 0.1})));
  const Rect r1 = sf.support(), r2 = s2.support();
  CHECK(r1.t_lo == r2.t_lo);
  CHECK(r1.x_hi == r2.x_hi);

  SampledFunction g;
  g.t0 = 0;
  g.x0 = 0;
  g.h = 0.5;
  g.nt = 2;
  g.nx = 2;
  g.values = {1, -2, 3, 4};
  SmearingFunction sg{g};
  SmearingFunction sg3 = sg.scaled(3.0);
  CHECK(smearing_value(sg3, {0.0, 0.5}) == doctest::Approx(-6.0));
  CHECK(smearing_value(sg3, {0.5, 0.0}) == doctest::Approx(9.0));
}

TEST_CASE("window ramp is a C1 monotone switch") {
  WindowSpec w{2.0, 4.0};
  CHECK(w.ramp(1.0) == 0.0);
  CHECK(w.ramp(2.0) == 0.0);
  CHECK(w.ramp(4.0) == 1.0);
  CHECK(w.ramp(5.0) == 1.0);
  CHECK(w.ramp(3.0) == doctest::Approx(0.5).epsilon(1e-15));

  double prev = -1.0;
  for (int k = 0; k <= 200; ++k) {
    const double t = 1.5 + 3.0 * k / 200.0;
    const double v = w.ramp(t);
    CHECK(v >= prev - 1e-15);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    prev = v;
  }

  // one-sided slopes at both ends vanish (cubic has flat tangents)
  const double h = 1e-6;
  CHECK(std::fabs(w.ramp(2.0 + h) - w.ramp(2.0)) / h < 1e-4);
  CHECK(std::fabs(w.ramp(4.0) - w.ramp(4.0 - h)) / h < 1e-4);
}
