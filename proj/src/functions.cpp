#include "qfup/functions.hpp"

#include <cmath>
#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include "qfup/errors.hpp"

namespace qfup {

namespace {

// 1-d profile on [-1, 1]; cos^2 vanishes with zero slope at the edges.
double cos2(double u) {
  const double c = std::cos(1.57079632679489661923 * u);
  return c * c;
}

}  // namespace

double eval_bump(const BumpSpec& spec, Point p) {
  if (spec.half_width <= 0.0) throw Error("bump half_width must be positive");
  const double ut = (p.t - spec.center.t) / spec.half_width;
  const double ux = (p.x - spec.center.x) / spec.half_width;
  if (std::fabs(ut) >= 1.0 || std::fabs(ux) >= 1.0) return 0.0;
  switch (spec.kind) {
    case BumpKind::cosine_bump:
      return spec.amplitude * cos2(ut) * cos2(ux);
    case BumpKind::truncated_gaussian:
      return spec.amplitude * std::exp(-4.5 * (ut * ut + ux * ux));
  }
  return 0.0;
}

bool SampledFunction::same_grid(const SampledFunction& o) const {
  return t0 == o.t0 && x0 == o.x0 && h == o.h && nt == o.nt && nx == o.nx;
}

void write_sampled(std::ostream& os, const SampledFunction& f) {
  os.precision(17);
  os << "sampledfunction 1\n";
  os << "origin " << f.t0 << " " << f.x0 << "\n";
  os << "spacing " << f.h << "\n";
  os << "dims " << f.nt << " " << f.nx << "\n";
  for (int i = 0; i < f.nt; ++i) {
    for (int j = 0; j < f.nx; ++j) os << (j ? " " : "") << f.at(i, j);
    os << "\n";
  }
}

SampledFunction read_sampled(std::istream& is) {
  std::string tag;
  int version = 0;
  is >> tag >> version;
  if (!is || tag != "sampledfunction" || version != 1)
    throw Error("not a sampledfunction file (bad header)");
  SampledFunction f;
  auto expect = [&](const char* key) {
    std::string k;
    is >> k;
    if (!is || k != key)
      throw Error(std::string("sampledfunction: expected '") + key + "' line");
  };
  expect("origin");
  is >> f.t0 >> f.x0;
  expect("spacing");
  is >> f.h;
  expect("dims");
  is >> f.nt >> f.nx;
  if (!is || f.h <= 0.0 || f.nt < 1 || f.nx < 1)
    throw Error("sampledfunction: bad grid parameters");
  f.values.resize((size_t)f.nt * f.nx);
  for (auto& v : f.values) {
    is >> v;
    if (!is) throw Error("sampledfunction: truncated value block");
  }
  return f;
}

void write_sampled_file(const std::string& path, const SampledFunction& f) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open for writing: " + path);
  write_sampled(os, f);
  if (!os) throw Error("write failed: " + path);
}

SampledFunction read_sampled_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open: " + path);
  return read_sampled(is);
}

Rect SmearingFunction::support() const {
  if (is_bump()) return bump().support();
  return sampled().support();
}

SmearingFunction SmearingFunction::scaled(double factor) const {
  if (is_bump()) {
    BumpSpec b = bump();
    b.amplitude *= factor;
    return SmearingFunction(b);
  }
  SampledFunction s = sampled();
  for (auto& v : s.values) v *= factor;
  return SmearingFunction(std::move(s));
}

double smearing_value(const SmearingFunction& f, Point p) {
  if (f.is_bump()) return eval_bump(f.bump(), p);
  const SampledFunction& s = f.sampled();
  if (s.nt < 1 || s.nx < 1) return 0.0;
  double it = (p.t - s.t0) / s.h;
  double jx = (p.x - s.x0) / s.h;
  // roundoff slack keeps nodes on the closed support boundary inside;
  // grid-aligned resampling must reproduce edge rows exactly
  const double slack = 1e-9 * std::max({1.0, std::fabs(it), std::fabs(jx)});
  if (it < -slack || jx < -slack || it > s.nt - 1 + slack ||
      jx > s.nx - 1 + slack)
    return 0.0;
  it = std::clamp(it, 0.0, (double)(s.nt - 1));
  jx = std::clamp(jx, 0.0, (double)(s.nx - 1));
  int i0 = std::min((int)it, s.nt - 2 >= 0 ? s.nt - 2 : 0);
  int j0 = std::min((int)jx, s.nx - 2 >= 0 ? s.nx - 2 : 0);
  if (s.nt == 1) i0 = 0;
  if (s.nx == 1) j0 = 0;
  const double ft = s.nt == 1 ? 0.0 : it - i0;
  const double fx = s.nx == 1 ? 0.0 : jx - j0;
  const int i1 = s.nt == 1 ? i0 : i0 + 1;
  const int j1 = s.nx == 1 ? j0 : j0 + 1;
  return (1 - ft) * ((1 - fx) * s.at(i0, j0) + fx * s.at(i0, j1)) +
         ft * ((1 - fx) * s.at(i1, j0) + fx * s.at(i1, j1));
}

double WindowSpec::ramp(double t) const {
  if (t2 <= t1) throw Error("window ramp needs t1 < t2");
  if (t <= t1) return 0.0;
  if (t >= t2) return 1.0;
  const double u = (t - t1) / (t2 - t1);
  return u * u * (3.0 - 2.0 * u);
}

}  // namespace qfup
