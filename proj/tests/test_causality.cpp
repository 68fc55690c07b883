#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "qfup/causality.hpp"
#include "qfup/errors.hpp"

using namespace qfup;

namespace {

struct NamedBump {
  std::string name;
  BumpSpec spec;
};

// table over real bump supports with hand-injected pairings (identity
// covariance), so verdicts are exact while the geometry stays physical
PairingTable geo_table(
    const std::vector<NamedBump>& bumps,
    const std::vector<std::tuple<std::string, std::string, double>>& deltas) {
  PairingTable t(1.0, QuadratureConfig{});
  auto specs = std::make_shared<std::vector<NamedBump>>(bumps);
  for (const NamedBump& b : bumps)
    t.add(b.name, SmearingFunction{b.spec});
  auto name_of = [specs](const SmearingFunction& f) -> std::string {
    const Rect s = f.support();
    for (const NamedBump& b : *specs) {
      const Rect r = b.spec.support();
      if (std::fabs(r.t_lo - s.t_lo) < 1e-12 &&
          std::fabs(r.x_lo - s.x_lo) < 1e-12)
        return b.name;
    }
    return {};
  };
  auto dv = std::make_shared<
      std::vector<std::tuple<std::string, std::string, double>>>(deltas);
  PairingTable::PairFn df = [name_of, dv](const SmearingFunction& x,
                                          const SmearingFunction& y) {
    const std::string a = name_of(x), b = name_of(y);
    for (const auto& [p, q, v] : *dv) {
      if (p == a && q == b) return v;
      if (p == b && q == a) return -v;
    }
    return 0.0;
  };
  PairingTable::PairFn cf = [name_of](const SmearingFunction& x,
                                      const SmearingFunction& y) {
    return name_of(x) == name_of(y) ? 1.0 : 0.0;
  };
  t.build_with(df, &cf);
  return t;
}

// exact causal-past membership for a single rectangle
bool in_past_of(const Rect& a, Point q) {
  if (q.t > a.t_hi) return false;
  const double d = std::max({a.x_lo - q.x, q.x - a.x_hi, 0.0});
  return d <= a.t_hi - q.t;
}

// early kick region, middle coupling region, far spacelike readout
const std::vector<NamedBump> kTriple = {
    {"h", {{0.0, 0.0}, 0.4, 1.0, BumpKind::cosine_bump}},
    {"f", {{1.5, 1.8}, 0.4, 1.0, BumpKind::cosine_bump}},
    {"g", {{2.0, 3.8}, 0.4, 1.0, BumpKind::cosine_bump}}};
const std::vector<std::tuple<std::string, std::string, double>> kTripleD = {
    {"h", "f", -0.4}, {"f", "g", -0.25}};

}  // namespace

TEST_CASE("support audit: no new labels means causal") {
  PairingTable t = geo_table(kTriple, kTripleD);
  const int g = t.find("g");
  WeylJet triv = WeylJet::trivial(g);
  SupportReport r0 = psni_check(triv, t.support(g), t);
  CHECK(r0.verdict == SupportVerdict::causal);
  CHECK(r0.new_labels.empty());
  CHECK(r0.witnesses.empty());

  // gaussian measurement multiplies by constants only
  WeylJet meas = apply({GaussianMeasureField{t.find("f"), 1.0}, {}}, triv, t);
  SupportReport r1 = psni_check(meas, t.support(g), t);
  CHECK(r1.verdict == SupportVerdict::causal);

  // a plain kick adds a phase, never a label
  WeylJet kicked = apply({KickField{t.find("h"), 0.9}, {}}, triv, t);
  CHECK(psni_check(kicked, t.support(g), t).verdict ==
        SupportVerdict::causal);
}

TEST_CASE("support audit: growth outside the past is flagged with witnesses") {
  PairingTable t = geo_table(kTriple, kTripleD);
  const int f = t.find("f"), g = t.find("g");
  WeylJet out = apply({KickFieldSquared{f}, {}}, WeylJet::trivial(g), t);
  SupportReport r = psni_check(out, t.support(g), t);
  CHECK(r.verdict == SupportVerdict::acausal);
  REQUIRE(r.new_labels.size() == 1);
  CHECK(r.new_labels[0].name == "f");
  // dominant weight is twice the pairing against the base
  CHECK(r.new_labels[0].weight == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(!r.witnesses.empty());
  const Rect sf = kTriple[1].spec.support();
  const Rect sg = kTriple[2].spec.support();
  for (const Point& w : r.witnesses) {
    CHECK(sf.contains(w));        // witness lies in the new support
    CHECK(!in_past_of(sg, w));    // and genuinely escapes the past
  }
  CHECK(!r.to_text().empty());

  // a tolerance above the entry weight silences the label
  SupportReport quiet = psni_check(out, t.support(g), t, 0.6);
  CHECK(quiet.verdict == SupportVerdict::causal);
}

TEST_CASE("support audit: growth confined to the past is inconclusive") {
  // stacked geometry: the squared kick sits deep inside the readout's past
  PairingTable t = geo_table(
      {{"k1", {{0.0, 0.0}, 0.4, 1.0, BumpKind::cosine_bump}},
       {"g", {{4.0, 0.0}, 0.4, 1.0, BumpKind::cosine_bump}}},
      {{"k1", "g", -0.3}});
  const int k1 = t.find("k1"), g = t.find("g");
  WeylJet out = apply({KickFieldSquared{k1}, {}}, WeylJet::trivial(g), t);
  SupportReport r = psni_check(out, t.support(g), t);
  CHECK(r.verdict == SupportVerdict::inconclusive);
  CHECK(r.witnesses.empty());
  REQUIRE(r.new_labels.size() == 1);
  CHECK(r.new_labels[0].name == "k1");
}

TEST_CASE("strength sweep: squared kick leaks a linear signal") {
  PairingTable t = geo_table(kTriple, kTripleD);
  GaussianState st{&t};
  const int h = t.find("h"), f = t.find("f"), g = t.find("g");
  Composition comp =
      compose({{KickField{h, 0.0}, {}}, {KickFieldSquared{f}, {}}});
  const std::vector<double> grid = {0.0, 0.5, 1.0, 1.5, 2.0};

  SignalReport r = signal_gradient(comp, 0, ObservableKind::field, g, st,
                                   grid, 1e-10);
  CHECK(r.verdict == SignalVerdict::signal);
  REQUIRE(r.coeffs.size() == 3);
  // exact algebra: the linear response is twice the pairing product
  const double want = 2.0 * t.delta(h, f) * t.delta(f, g);
  CHECK(r.coeffs[1] == doctest::Approx(want).epsilon(1e-12));
  CHECK(want == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(std::fabs(r.coeffs[2]) < 1e-12);
  CHECK(r.lambdas.size() == grid.size());
  CHECK(r.expectations.size() == grid.size());
  CHECK(!r.to_text().empty());

  // verdict is stable across thresholds below the coefficient
  for (double thr : {1e-12, 1e-8, 1e-2}) {
    CHECK(signal_gradient(comp, 0, ObservableKind::field, g, st, grid, thr)
              .verdict == SignalVerdict::signal);
  }
  CHECK(signal_gradient(comp, 0, ObservableKind::field, g, st, grid, 0.5)
            .verdict == SignalVerdict::no_signal);
}

TEST_CASE("strength sweep: plain kicks never signal") {
  PairingTable t = geo_table(kTriple, kTripleD);
  GaussianState st{&t};
  const int h = t.find("h"), f = t.find("f"), g = t.find("g");
  Composition comp =
      compose({{KickField{h, 0.0}, {}}, {KickField{f, 0.7}, {}}});
  const std::vector<double> grid = {0.0, 0.5, 1.0, 1.5, 2.0};
  SignalReport r =
      signal_gradient(comp, 0, ObservableKind::field, g, st, grid);
  CHECK(r.verdict == SignalVerdict::no_signal);
  // the constant column records the plain kick's displacement
  CHECK(r.coeffs[0] == doctest::Approx(0.7 * t.delta(g, f)).epsilon(1e-12));
  CHECK(std::fabs(r.coeffs[1]) < 1e-12);
  CHECK(std::fabs(r.coeffs[2]) < 1e-12);
}

TEST_CASE("strength sweep: product measurement leaks quadratically") {
  PairingTable t = geo_table(
      {{"h", {{0.0, 0.0}, 0.4, 1.0, BumpKind::cosine_bump}},
       {"f1", {{1.5, 1.8}, 0.4, 1.0, BumpKind::cosine_bump}},
       {"f2", {{0.0, 3.0}, 0.4, 1.0, BumpKind::cosine_bump}},
       {"g", {{2.0, 3.8}, 0.4, 1.0, BumpKind::cosine_bump}}},
      {{"h", "f1", -0.3}, {"f2", "g", 0.2}});
  GaussianState st{&t};
  const int h = t.find("h"), f1 = t.find("f1"), f2 = t.find("f2"),
            g = t.find("g");
  const double sigma = 1.0;
  GaussianMeasureCommutingPoly cp;
  cp.poly = poly_mul(OperatorPoly::label(f1), OperatorPoly::label(f2), t);
  cp.sigma = sigma;
  Composition comp = compose({{KickField{h, 0.0}, {}}, {cp, {}}});
  const std::vector<double> grid = {0.0, 0.5, 1.0, 1.5, 2.0};
  SignalReport r = signal_gradient(comp, 0, ObservableKind::field_squared, g,
                                   st, grid);
  CHECK(r.verdict == SignalVerdict::signal);
  // kick moves the measured factor, the measurement back-reacts on the
  // square: quadratic coefficient (pairing(f2,g)/2 sigma)^2 pairing(f1,h)^2
  const double k = t.delta(f2, g) / (2.0 * sigma);
  const double want2 = k * k * t.delta(f1, h) * t.delta(f1, h);
  CHECK(r.coeffs[2] == doctest::Approx(want2).epsilon(1e-12));
  CHECK(std::fabs(r.coeffs[1]) < 1e-12);
  // constant column: vacuum second moment plus the measurement widening
  const double want0 =
      t.covariance(g, g) + k * k * t.covariance(f1, f1);
  CHECK(r.coeffs[0] == doctest::Approx(want0).epsilon(1e-12));
}

TEST_CASE("strength sweep rejects ineligible probes") {
  PairingTable t = geo_table(kTriple, kTripleD);
  GaussianState st{&t};
  const int h = t.find("h"), f = t.find("f"), g = t.find("g");
  const std::vector<double> grid = {0.0, 1.0, 2.0};
  // probe must be a plain field kick
  Composition c1 =
      compose({{KickFieldSquared{h}, {}}, {KickFieldSquared{f}, {}}});
  CHECK_THROWS_AS(
      signal_gradient(c1, 0, ObservableKind::field, g, st, grid), Error);
  // probe region must be strictly spacelike to the observed support
  Composition c2 =
      compose({{KickField{f, 0.0}, {}}, {KickFieldSquared{f}, {}}});
  CHECK_THROWS_AS(
      signal_gradient(c2, 0, ObservableKind::field, g, st, grid), Error);
  // index must point into the composition
  Composition c3 = compose({{KickField{h, 0.0}, {}}});
  CHECK_THROWS_AS(
      signal_gradient(c3, 5, ObservableKind::field, g, st, grid), Error);
}

TEST_CASE("quadrature-built triangle: tiny but exact linear response") {
  // real pairings on a wedge geometry: the probe is spacelike to the
  // readout, the coupling region talks to both, and the induced linear
  // coefficient sits far below the default threshold yet matches the
  // algebraic product exactly
  PairingTable t(1.0, QuadratureConfig{});
  t.add("h", SmearingFunction{BumpSpec{{0.0, -0.8}, 0.25, 1.0,
                                       BumpKind::cosine_bump}});
  t.add("f", SmearingFunction{BumpSpec{{1.0, 1.0}, 0.25, 1.0,
                                       BumpKind::cosine_bump}});
  t.add("g", SmearingFunction{BumpSpec{{2.0, 2.85}, 0.25, 1.0,
                                       BumpKind::cosine_bump}});
  t.build(true);
  const int h = t.find("h"), f = t.find("f"), g = t.find("g");

  CHECK(region_relation(t.support(h), t.support(g)) ==
        RegionRelation::strictly_spacelike);
  CHECK(region_relation(t.support(h), t.support(f)) ==
        RegionRelation::causally_connected);
  CHECK(region_relation(t.support(f), t.support(g)) ==
        RegionRelation::causally_connected);
  CHECK(t.delta(h, g) == 0.0);
  CHECK(t.delta(h, f) < 0.0);
  CHECK(t.delta(f, g) < 0.0);

  GaussianState st{&t};
  Composition comp =
      compose({{KickField{h, 0.0}, {}}, {KickFieldSquared{f}, {}}});
  const std::vector<double> grid = {0.0, 0.5, 1.0, 1.5, 2.0};
  const double want = 2.0 * t.delta(h, f) * t.delta(f, g);

  // semantic detection needs a threshold matched to the tiny pairings
  SignalReport fine = signal_gradient(comp, 0, ObservableKind::field, g, st,
                                      grid, 1e-14);
  CHECK(fine.verdict == SignalVerdict::signal);
  CHECK(fine.coeffs[1] == doctest::Approx(want).epsilon(1e-9));

  // the default threshold treats the same response as noise
  SignalReport coarse =
      signal_gradient(comp, 0, ObservableKind::field, g, st, grid);
  CHECK(coarse.verdict == SignalVerdict::no_signal);
}
