#include "qfup/smearing.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include "qfup/bessel.hpp"
#include "qfup/errors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace qfup {

double pauli_jordan_point(const DeltaKernel& k, Point x, Point y) {
  const CausalRelation rel = causal_relation(y, x);  // where x sits seen from y
  if (rel == CausalRelation::spacelike) return 0.0;
  const double s = rel == CausalRelation::q_in_future_of_p ? 1.0 : -1.0;
  if (k.mass == 0.0) return 0.5 * s;
  const double dt = x.t - y.t, dx = x.x - y.x;
  const double tau2 = dt * dt - dx * dx;
  return 0.5 * s * bessel_j0(k.mass * std::sqrt(std::max(tau2, 0.0)));
}

namespace {

struct NodeSet {
  std::vector<Point> pts;
  std::vector<double> w;  // per-node area weight
};

NodeSet sampled_nodes(const SampledFunction& f) {
  NodeSet ns;
  ns.pts.reserve(f.values.size());
  ns.w.reserve(f.values.size());
  const double area = f.h * f.h;
  for (int i = 0; i < f.nt; ++i)
    for (int j = 0; j < f.nx; ++j) {
      const double v = f.at(i, j);
      if (v != 0.0) {
        ns.pts.push_back(f.node(i, j));
        ns.w.push_back(v * area);
      }
    }
  return ns;
}

double pair_sum(const NodeSet& a, const NodeSet& b, const DeltaKernel& k,
                ExecPolicy exec) {
  const int na = (int)a.pts.size();
  std::vector<double> row(na, 0.0);
  // per-row partials summed serially afterwards keep the result identical
  // for any thread count
#pragma omp parallel for schedule(static) if (exec == ExecPolicy::parallel)
  for (int i = 0; i < na; ++i) {
    double acc = 0.0;
    for (size_t j = 0; j < b.pts.size(); ++j)
      acc += b.w[j] * pauli_jordan_point(k, a.pts[i], b.pts[j]);
    row[i] = a.w[i] * acc;
  }
  double total = 0.0;
  for (double r : row) total += r;
  return total;
}

// 16-point Gauss-Legendre rule on [-1, 1], positive half; nodes come in
// symmetric pairs with equal weights.
constexpr double kGaussX[8] = {
    0.0950125098376374402, 0.2816035507792589132, 0.4580167776572273863,
    0.6178762444026437484, 0.7554044083550030339, 0.8656312023878317439,
    0.9445750230732325761, 0.9894009349916499326};
constexpr double kGaussW[8] = {
    0.1894506104550684963, 0.1826034150449235889, 0.1691565193950025382,
    0.1495959888165767320, 0.1246289712555338721, 0.0951585116824927848,
    0.0622535239386478929, 0.0271524594117540949};

// Integral over the spatial slice t = ty of J0 restricted to the cone of x,
// weighted by the bump: the slice meets the cone in a single interval whose
// endpoints are clipped against the support, and the integrand is analytic
// on that interval (J0(m*sqrt(s)) is entire in s), so a fixed-order Gauss
// rule is accurate to near machine precision.
double cone_slice(const BumpSpec& b, double mass, Point x, double ty) {
  const double r = std::fabs(ty - x.t);
  const Rect s = b.support();
  const double lo = std::max(s.x_lo, x.x - r);
  const double hi = std::min(s.x_hi, x.x + r);
  if (hi <= lo) return 0.0;
  const double c = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  double acc = 0.0;
  for (int n = 0; n < 8; ++n) {
    for (int sgn = -1; sgn <= 1; sgn += 2) {
      const double xy = c + sgn * half * kGaussX[n];
      const double d = xy - x.x;
      double kv = 1.0;
      if (mass != 0.0)
        kv = bessel_j0(mass * std::sqrt(std::max(r * r - d * d, 0.0)));
      acc += kGaussW[n] * kv * eval_bump(b, {ty, xy});
    }
  }
  return acc * half;
}

double cone_panel(const BumpSpec& b, double mass, Point x, double ta,
                  double tb) {
  const double c = 0.5 * (ta + tb), half = 0.5 * (tb - ta);
  if (half <= 0.0) return 0.0;
  double acc = 0.0;
  for (int n = 0; n < 8; ++n)
    for (int sgn = -1; sgn <= 1; sgn += 2)
      acc += kGaussW[n] * cone_slice(b, mass, x, c + sgn * half * kGaussX[n]);
  return acc * half;
}

// Value at x of the commutator kernel smeared against the bump:
// integral over y of Delta(x, y) b(y). Time panels are split where the
// cone of x crosses the support edges and at x.t itself (sign change), so
// every panel integrand is smooth and fixed-order Gauss panels converge.
double kernel_field(const BumpSpec& b, double mass, Point x) {
  const Rect s = b.support();
  const double d1 = std::fabs(x.x - s.x_lo), d2 = std::fabs(x.x - s.x_hi);
  double cuts[7] = {s.t_lo,   s.t_hi,   x.t,      x.t - d1,
                    x.t + d1, x.t - d2, x.t + d2};
  std::sort(cuts, cuts + 7);
  double total = 0.0;
  for (int i = 0; i + 1 < 7; ++i) {
    const double ta = std::max(cuts[i], s.t_lo);
    const double tb = std::min(cuts[i + 1], s.t_hi);
    if (tb <= ta) continue;
    const double sign = 0.5 * (ta + tb) < x.t ? 0.5 : -0.5;
    total += sign * cone_panel(b, mass, x, ta, tb);
  }
  return total;
}

// Fixed sample grid against the exactly integrated kernel field.
double sampled_against_bump(const SampledFunction& f, const BumpSpec& g,
                            double mass, ExecPolicy exec) {
  std::vector<double> rows(f.nt, 0.0);
#pragma omp parallel for schedule(dynamic) if (exec == ExecPolicy::parallel)
  for (int i = 0; i < f.nt; ++i) {
    double acc = 0.0;
    for (int j = 0; j < f.nx; ++j) {
      const double v = f.at(i, j);
      if (v != 0.0) acc += v * kernel_field(g, mass, f.node(i, j));
    }
    rows[i] = acc;
  }
  double total = 0.0;
  for (double r : rows) total += r;
  return total * f.h * f.h;
}

// One midpoint level over the support of f; the grid is aligned to the
// support edges so the C^1 decay of the bump keeps the midpoint error
// expansion clean under halving.
double bump_level(const BumpSpec& f, const BumpSpec& g, double mass,
                  double cell, ExecPolicy exec) {
  const Rect s = f.support();
  const int n = std::max(1, (int)std::ceil((s.t_hi - s.t_lo) / cell - 1e-12));
  const double h = (s.t_hi - s.t_lo) / n;  // support is square
  std::vector<double> rows(n, 0.0);
#pragma omp parallel for schedule(dynamic) if (exec == ExecPolicy::parallel)
  for (int i = 0; i < n; ++i) {
    const double t = s.t_lo + (i + 0.5) * h;
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
      const Point p{t, s.x_lo + (j + 0.5) * h};
      const double fv = eval_bump(f, p);
      if (fv != 0.0) acc += fv * kernel_field(g, mass, p);
    }
    rows[i] = acc;
  }
  double total = 0.0;
  for (double r : rows) total += r;
  return total * h * h;
}

// Strict ordering key so that both orientations of a pair route through one
// oriented computation; exact antisymmetry then holds by construction.
int order_compare(const SmearingFunction& a, const SmearingFunction& b) {
  auto cmp = [](double x, double y) { return x < y ? -1 : (x > y ? 1 : 0); };
  const Rect ra = a.support(), rb = b.support();
  if (int c = cmp(ra.t_lo, rb.t_lo)) return c;
  if (int c = cmp(ra.x_lo, rb.x_lo)) return c;
  if (int c = cmp(ra.t_hi, rb.t_hi)) return c;
  if (int c = cmp(ra.x_hi, rb.x_hi)) return c;
  if (a.is_bump()) {
    const BumpSpec &ba = a.bump(), &bb = b.bump();
    if (int c = cmp((double)ba.kind, (double)bb.kind)) return c;
    if (int c = cmp(ba.center.t, bb.center.t)) return c;
    if (int c = cmp(ba.center.x, bb.center.x)) return c;
    if (int c = cmp(ba.half_width, bb.half_width)) return c;
    return cmp(ba.amplitude, bb.amplitude);
  }
  const SampledFunction &sa = a.sampled(), &sb = b.sampled();
  if (int c = cmp(sa.h, sb.h)) return c;
  if (int c = cmp((double)sa.nt, (double)sb.nt)) return c;
  if (int c = cmp((double)sa.nx, (double)sb.nx)) return c;
  for (size_t i = 0; i < sa.values.size(); ++i)
    if (int c = cmp(sa.values[i], sb.values[i])) return c;
  return 0;
}

}  // namespace

double delta_bilinear(const SmearingFunction& f, const SmearingFunction& g,
                      const DeltaKernel& k, const QuadratureConfig& q,
                      ExecPolicy exec) {
  if (q.dx <= 0.0 || q.levels < 1 || q.tol <= 0.0)
    throw Error("delta_bilinear: bad quadrature configuration");
  if (region_relation(RegionSet{{f.support()}}, RegionSet{{g.support()}}) ==
      RegionRelation::strictly_spacelike)
    return 0.0;  // the cone never meets the other support
  if (f.is_bump() != g.is_bump()) {
    // the sampled side supplies the outer nodes; the bump side is integrated
    // exactly, and both orientations share one computation
    if (f.is_bump())
      return -sampled_against_bump(g.sampled(), f.bump(), k.mass, exec);
    return sampled_against_bump(f.sampled(), g.bump(), k.mass, exec);
  }
  const int ord = order_compare(f, g);
  if (ord == 0) return 0.0;  // identical functions: antisymmetry forces zero
  if (ord > 0) return -delta_bilinear(g, f, k, q, exec);
  if (!f.is_bump()) {
    // two fixed grids: single evaluation, no refinement possible
    return pair_sum(sampled_nodes(f.sampled()), sampled_nodes(g.sampled()), k,
                    exec);
  }
  // refinable midpoint levels over f against the exact kernel field of g;
  // the refined (extrapolated) sequence is accepted once it stabilizes in
  // relative terms, which keeps thin-overlap pairs meaningful even when the
  // value is many orders below the function scale
  double prev_v = 0.0, prev_r = 0.0, prev_diff = 0.0;
  bool have_v = false, have_r = false;
  double cell = q.dx;
  for (int level = 0; level < q.levels; ++level, cell *= 0.5) {
    const double v = bump_level(f.bump(), g.bump(), k.mass, cell, exec);
    if (have_v) {
      const double diff = std::fabs(v - prev_v);
      double p = 2.0;  // halving the cell divides midpoint error by ~4
      if (prev_diff > 0.0 && diff > 0.0) {
        const double est = std::log2(prev_diff / diff);
        if (std::isfinite(est)) p = std::clamp(est, 1.0, 4.0);
      }
      const double r = v + (v - prev_v) / (std::exp2(p) - 1.0);
      const double vscale = std::max(std::fabs(v), std::fabs(prev_v));
      if (diff <= q.tol * vscale) return r;
      if (have_r) {
        const double rdiff = std::fabs(r - prev_r);
        const double rscale = std::max(std::fabs(r), std::fabs(prev_r));
        if (rdiff <= q.tol * rscale) return r;
      }
      have_r = true;
      prev_r = r;
      prev_diff = diff;
    } else if (q.levels == 1) {
      return v;  // single-level budget: accept the base evaluation
    }
    prev_v = v;
    have_v = true;
  }
  throw ConvergenceError("delta_bilinear did not reach tolerance", prev_r,
                         prev_v);
}

namespace {

// Transform of the cos^2 profile on [-1, 1]:
//   integral cos^2(pi u / 2) e^{i kappa u} du
//     = pi^2 sin(kappa) / (kappa (pi^2 - kappa^2)),
// real and even; removable singularities at 0 and +-pi.
double cos2_profile_ft(double kappa) {
  const double a = std::fabs(kappa);
  const double pi = 3.14159265358979323846;
  if (a < 1e-7) return 1.0 + kappa * kappa * (1.0 / (pi * pi) - 1.0 / 6.0);
  if (std::fabs(a - pi) < 1e-5) {
    const double d = a - pi;  // pi^2 sin(d) / (d (pi + d) (2 pi + d))
    const double sinc = std::fabs(d) < 1e-14 ? 1.0 : std::sin(d) / d;
    return pi * pi * sinc / ((pi + d) * (2.0 * pi + d));
  }
  return pi * pi * std::sin(a) / (a * (pi * pi - a * a));
}

// Transform of exp(-4.5 u^2) on [-1, 1] by composite Simpson; node count
// grows with the oscillation rate.
double gauss_profile_ft(double kappa) {
  const double a = std::fabs(kappa);
  int n = 256 + 16 * (int)std::ceil(a);
  if (n % 2) ++n;
  const double h = 2.0 / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double u = -1.0 + i * h;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * std::exp(-4.5 * u * u) * std::cos(a * u);
  }
  return acc * h / 3.0;
}

std::complex<double> bump_ft(const BumpSpec& b, double omega, double k) {
  // separable product profile; the phase carries the center offsets
  const double hw = b.half_width;
  double pt, px;
  if (b.kind == BumpKind::cosine_bump) {
    pt = cos2_profile_ft(omega * hw);
    px = cos2_profile_ft(k * hw);
  } else {
    pt = gauss_profile_ft(omega * hw);
    px = gauss_profile_ft(k * hw);
  }
  const std::complex<double> phase =
      std::exp(std::complex<double>(0.0, omega * b.center.t - k * b.center.x));
  return b.amplitude * hw * hw * pt * px * phase;
}

std::complex<double> sampled_ft(const SampledFunction& f, double omega,
                                double k) {
  std::complex<double> acc = 0.0;
  for (int i = 0; i < f.nt; ++i) {
    const double t = f.t0 + i * f.h;
    std::complex<double> row = 0.0;
    for (int j = 0; j < f.nx; ++j) {
      const double v = f.at(i, j);
      if (v != 0.0)
        row += v * std::exp(std::complex<double>(0.0, -k * (f.x0 + j * f.h)));
    }
    acc += row * std::exp(std::complex<double>(0.0, omega * t));
  }
  return acc * (f.h * f.h);
}

std::complex<double> smearing_ft(const SmearingFunction& f, double omega,
                                 double k) {
  return f.is_bump() ? bump_ft(f.bump(), omega, k) : sampled_ft(f.sampled(), omega, k);
}

struct KGrid {
  std::vector<double> k;
  double dk;
};

std::complex<double> momentum_sum(const SmearingFunction& f,
                                  const SmearingFunction& g, double mass,
                                  const KGrid& grid, ExecPolicy exec,
                                  std::vector<double>* magnitudes) {
  const int n = (int)grid.k.size();
  std::vector<std::complex<double>> vals(n);
#pragma omp parallel for schedule(static) if (exec == ExecPolicy::parallel)
  for (int i = 0; i < n; ++i) {
    const double k = grid.k[i];
    const double omega = std::sqrt(k * k + mass * mass);
    const std::complex<double> ff = smearing_ft(f, omega, k);
    const std::complex<double> gg = smearing_ft(g, omega, k);
    // conjugation on the second factor keeps the imaginary part aligned
    // with the commutator orientation fixed by the lattice oracle
    vals[i] = ff * std::conj(gg) / (4.0 * 3.14159265358979323846 * omega);
  }
  std::complex<double> acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;  // trapezoid
    acc += w * vals[i];
  }
  if (magnitudes) {
    magnitudes->resize(n);
    for (int i = 0; i < n; ++i) (*magnitudes)[i] = std::abs(vals[i]);
  }
  return acc * grid.dk;
}

}  // namespace

VacuumResult vacuum_covariance_detail(const SmearingFunction& f,
                                      const SmearingFunction& g, double mass,
                                      const QuadratureConfig& q,
                                      ExecPolicy exec) {
  if (mass <= 0.0) throw Error("vacuum_covariance requires mass > 0");
  if (q.kmax <= mass) throw Error("vacuum_covariance: kmax too small");
  double dk = std::min(0.05, q.kmax / 400.0);
  std::complex<double> prev = 0.0;
  bool have_prev = false;
  std::vector<double> mags;
  for (int level = 0; level < std::max(2, q.levels); ++level, dk *= 0.5) {
    const int half = (int)std::ceil(q.kmax / dk);
    KGrid grid;
    grid.dk = dk;
    grid.k.reserve(2 * half + 1);
    for (int i = -half; i <= half; ++i) grid.k.push_back(i * dk);
    const std::complex<double> v =
        momentum_sum(f, g, mass, grid, exec, &mags);
    if (have_prev && std::abs(v - prev) <= q.tol) {
      VacuumResult res;
      res.value = v.real();
      res.imag_part = v.imag();
      res.kmax = q.kmax;
      res.nodes = (int)grid.k.size();
      // decay-slope fit on the outer half of the sampled integrand gives a
      // power-law estimate of the truncated tail
      const int n = (int)mags.size();
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      int cnt = 0;
      for (int i = n * 7 / 8; i < n; ++i) {
        const double kk = std::fabs(grid.k[i]);
        if (kk < q.kmax * 0.5 || mags[i] <= 0.0) continue;
        const double lx = std::log(kk), ly = std::log(mags[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++cnt;
      }
      if (cnt >= 4) {
        const double denom = cnt * sxx - sx * sx;
        const double slope = denom != 0.0 ? (cnt * sxy - sx * sy) / denom : 0.0;
        const double logc = (sy - slope * sx) / cnt;
        if (slope < -1.1) {
          const double p = -slope;
          res.tail_bound = 2.0 * std::exp(logc) *
                           std::pow(q.kmax, 1.0 - p) / (p - 1.0);
        } else {
          res.tail_bound = std::numeric_limits<double>::infinity();
        }
      } else {
        res.tail_bound = 0.0;  // integrand already below resolution
      }
      return res;
    }
    prev = v;
    have_prev = true;
  }
  throw ConvergenceError("vacuum_covariance did not reach tolerance",
                         prev.real(), std::abs(prev));
}

double vacuum_covariance(const SmearingFunction& f, const SmearingFunction& g,
                         double mass, const QuadratureConfig& q,
                         ExecPolicy exec) {
  return vacuum_covariance_detail(f, g, mass, q, exec).value;
}

int PairingTable::add(const std::string& name, SmearingFunction fn) {
  if (built_) throw Error("pairing table already built");
  if (name.empty()) throw Error("pairing table: empty function name");
  if (find(name) >= 0)
    throw Error("duplicate function name '" + name + "'");
  names_.push_back(name);
  fns_.push_back(std::move(fn));
  return (int)names_.size() - 1;
}

int PairingTable::find(const std::string& name) const {
  for (size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return (int)i;
  return -1;
}

RegionSet PairingTable::support(int id) const {
  return RegionSet{{fns_.at(id).support()}};
}

void PairingTable::build(bool with_covariance, ExecPolicy exec) {
  DeltaKernel kern{mass_};
  PairFn dfn = [&](const SmearingFunction& a, const SmearingFunction& b) {
    return delta_bilinear(a, b, kern, quad_, exec);
  };
  if (with_covariance) {
    PairFn cfn = [&](const SmearingFunction& a, const SmearingFunction& b) {
      return vacuum_covariance(a, b, mass_, quad_, exec);
    };
    build_with(dfn, &cfn);
  } else {
    build_with(dfn, nullptr);
  }
}

void PairingTable::build_with(const PairFn& delta_fn, const PairFn* cov_fn) {
  if (built_) throw Error("pairing table already built");
  const int n = size();
  delta_.assign((size_t)n * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = delta_fn(fns_[i], fns_[j]);
      delta_[(size_t)i * n + j] = v;
      delta_[(size_t)j * n + i] = -v;
    }
  if (cov_fn) {
    cov_.assign((size_t)n * n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        const double v = (*cov_fn)(fns_[i], fns_[j]);
        cov_[(size_t)i * n + j] = v;
        cov_[(size_t)j * n + i] = v;
      }
    // positivity of cov + (i/2) pairing is what makes Gaussian moments a
    // state; indefinite data is rejected here once instead of failing
    // obscurely downstream
    Eigen::MatrixXcd m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        m(i, j) = std::complex<double>(cov_[(size_t)i * n + j],
                                       0.5 * delta_[(size_t)i * n + j]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
    if (es.info() != Eigen::Success)
      throw Error("pairing table: eigenvalue check failed to converge");
    const double lo = es.eigenvalues().minCoeff();
    const double hi = std::max(1.0, es.eigenvalues().maxCoeff());
    const double tol = std::max(1e-9, 10.0 * quad_.tol);
    if (lo < -tol * hi)
      throw Error("pairing table: covariance block is not positive "
                  "semidefinite (min eigenvalue " +
                  std::to_string(lo) + ")");
    has_cov_ = true;
  }
  built_ = true;
}

double PairingTable::delta(int i, int j) const {
  if (!built_) throw Error("pairing table not built");
  return delta_.at((size_t)i * size() + j);
}

double PairingTable::covariance(int i, int j) const {
  if (!has_cov_) throw Error("pairing table built without covariance");
  return cov_.at((size_t)i * size() + j);
}

double PairingTable::delta_scale() const {
  if (!built_) throw Error("pairing table not built");
  double m = 1.0;
  for (double v : delta_) m = std::max(m, std::fabs(v));
  return m;
}

}  // namespace qfup
