#pragma once

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "qfup/geometry.hpp"

namespace qfup {

enum class BumpKind {
  cosine_bump,         // separable cos^2 profile, exactly C^1 at the edge
  truncated_gaussian,  // exp(-4.5 r^2) in scaled coordinates, cut at the edge
};

struct BumpSpec {
  Point center;
  double half_width = 1.0;  // same extent in t and x
  double amplitude = 1.0;
  BumpKind kind = BumpKind::cosine_bump;

  Rect support() const {
    return {center.t - half_width, center.t + half_width,
            center.x - half_width, center.x + half_width};
  }
};

// Pointwise value; identically zero outside the support square.
double eval_bump(const BumpSpec& spec, Point p);

// Values on a uniform grid with equal spacing in t and x; node (i, j)
// sits at (t0 + i*h, x0 + j*h). Values are stored row-major in t.
struct SampledFunction {
  double t0 = 0.0, x0 = 0.0;
  double h = 1.0;
  int nt = 0, nx = 0;
  std::vector<double> values;

  double at(int i, int j) const { return values[(size_t)i * nx + j]; }
  double& at(int i, int j) { return values[(size_t)i * nx + j]; }
  Point node(int i, int j) const { return {t0 + i * h, x0 + j * h}; }
  Rect support() const {
    return {t0, t0 + (nt - 1) * h, x0, x0 + (nx - 1) * h};
  }
  bool same_grid(const SampledFunction& o) const;
};

// ASCII round-trip with full double precision (17 significant digits);
// write followed by read reproduces every value bit for bit.
void write_sampled(std::ostream& os, const SampledFunction& f);
SampledFunction read_sampled(std::istream& is);
void write_sampled_file(const std::string& path, const SampledFunction& f);
SampledFunction read_sampled_file(const std::string& path);

class SmearingFunction {
 public:
  SmearingFunction() = default;
  explicit SmearingFunction(BumpSpec b) : rep_(std::move(b)) {}
  explicit SmearingFunction(SampledFunction s) : rep_(std::move(s)) {}

  bool is_bump() const { return std::holds_alternative<BumpSpec>(rep_); }
  const BumpSpec& bump() const { return std::get<BumpSpec>(rep_); }
  const SampledFunction& sampled() const {
    return std::get<SampledFunction>(rep_);
  }
  Rect support() const;
  // scaling by a constant; used for strength-lambda rebinding
  SmearingFunction scaled(double factor) const;

 private:
  std::variant<BumpSpec, SampledFunction> rep_;
};

// Pointwise value of either representation: bumps evaluate their profile,
// sampled functions interpolate bilinearly and vanish off their grid.
double smearing_value(const SmearingFunction& f, Point p);

// Window profile ramping 0 -> 1 over [t1, t2] via 3u^2 - 2u^3; constant
// outside, C^1 everywhere.
struct WindowSpec {
  double t1 = 0.0, t2 = 1.0;
  double ramp(double t) const;
};

}  // namespace qfup
