#include "qfup/classical.hpp"

#include <algorithm>
#include <cmath>

#include "qfup/errors.hpp"

namespace qfup {

namespace {

// nodes needed to reach `hi` from `lo` (rounded outward, guarding drift)
int span_count(double lo, double hi, double step) {
  return (int)std::ceil((hi - lo) / step - 1e-9) + 1;
}

void require_cone_inside(const Rect& src, const Lattice& lat, bool future) {
  const Rect& w = lat.window;
  if (src.t_lo < w.t_lo + 2 * lat.dt || src.t_hi > w.t_hi - 2 * lat.dt)
    throw Error("lattice window lacks temporal margin around the source");
  const double reach = future ? w.t_hi - src.t_lo : src.t_hi - w.t_lo;
  if (src.x_lo - reach < w.x_lo + lat.dx || src.x_hi + reach > w.x_hi - lat.dx)
    throw Error("lattice window too narrow for the source's causal cone");
}

// forward evolution with zero data on the first two rows; src(i, j) is the
// inhomogeneity at row i
template <class Src>
LatticeField march(const Lattice& lat, double mass, const Src& src,
                   ExecPolicy exec) {
  LatticeField out;
  out.lat = lat;
  out.values.assign((std::size_t)lat.nt * lat.nx, 0.0);
  const double r2 = (lat.dt * lat.dt) / (lat.dx * lat.dx);
  const double dt2 = lat.dt * lat.dt;
  const double m2 = mass * mass;
  const bool par = exec == ExecPolicy::parallel;
  const int jend = lat.nx - 1;
  for (int i = 1; i + 1 < lat.nt; ++i) {
    const double* prev = &out.values[(std::size_t)(i - 1) * lat.nx];
    const double* cur = &out.values[(std::size_t)i * lat.nx];
    double* next = &out.values[(std::size_t)(i + 1) * lat.nx];
#pragma omp parallel for schedule(static) if (par)
    for (int j = 1; j < jend; ++j) {
      next[j] = 2.0 * cur[j] - prev[j] +
                r2 * (cur[j + 1] - 2.0 * cur[j] + cur[j - 1]) -
                dt2 * m2 * cur[j] + dt2 * src(i, j);
    }
  }
  return out;
}

LatticeField solve_retarded_grid(const LatticeField& src, double mass,
                                 ExecPolicy exec) {
  return march(src.lat, mass, [&](int i, int j) { return src.at(i, j); },
               exec);
}

// trims the exact nonzero block of a field restricted to rows
// [row_lo, row_hi] and returns it as a sampled function on the same grid
SampledFunction trim_block(const LatticeField& g, int row_lo, int row_hi) {
  const Lattice& lat = g.lat;
  int ilo = lat.nt, ihi = -1, jlo = lat.nx, jhi = -1;
  for (int i = std::max(row_lo, 0); i <= std::min(row_hi, lat.nt - 1); ++i)
    for (int j = 0; j < lat.nx; ++j)
      if (g.at(i, j) != 0.0) {
        ilo = std::min(ilo, i);
        ihi = std::max(ihi, i);
        jlo = std::min(jlo, j);
        jhi = std::max(jhi, j);
      }
  SampledFunction out;
  out.h = lat.dx;
  if (ihi < 0) {  // identically zero: return a one-node zero function
    out.t0 = lat.t(std::max(row_lo, 0));
    out.x0 = lat.x(0);
    out.nt = out.nx = 1;
    out.values.assign(1, 0.0);
    return out;
  }
  out.t0 = lat.t(ilo);
  out.x0 = lat.x(jlo);
  out.nt = ihi - ilo + 1;
  out.nx = jhi - jlo + 1;
  out.values.resize((std::size_t)out.nt * out.nx);
  for (int i = ilo; i <= ihi; ++i)
    for (int j = jlo; j <= jhi; ++j)
      out.at(i - ilo, j - jlo) = g.at(i, j);
  return out;
}

// rows whose ramp stencil is not constant; outside them the windowed
// residual vanishes identically
void slab_rows(const Lattice& lat, const WindowSpec& w, int& lo, int& hi) {
  lo = lat.nt;
  hi = -1;
  for (int i = 1; i + 1 < lat.nt; ++i) {
    const double a = w.ramp(lat.t(i - 1)), b = w.ramp(lat.t(i)),
                 c = w.ramp(lat.t(i + 1));
    if (a != b || b != c) {
      lo = std::min(lo, i);
      hi = std::max(hi, i);
    }
  }
}

void check_window_spec(const Lattice& lat, const WindowSpec& w) {
  if (!(w.t1 < w.t2)) throw Error("mover window needs t1 < t2");
  if (w.t1 < lat.window.t_lo + lat.dt || w.t2 > lat.window.t_hi - lat.dt)
    throw Error("mover window slab must sit inside the lattice window");
}

SampledFunction windowed_residual(const LatticeField& phi, double mass,
                                  const WindowSpec& w) {
  const Lattice& lat = phi.lat;
  LatticeField windowed;
  windowed.lat = lat;
  windowed.values.resize(phi.values.size());
  for (int i = 0; i < lat.nt; ++i) {
    const double r = w.ramp(lat.t(i));
    for (int j = 0; j < lat.nx; ++j)
      windowed.at(i, j) = r * phi.at(i, j);
  }
  LatticeField res = discrete_wave_op(windowed, mass);
  int lo, hi;
  slab_rows(lat, w, lo, hi);
  return trim_block(res, lo, hi);
}

}  // namespace

Lattice make_lattice(Rect window, double dx, double dt) {
  if (!(dx > 0.0)) throw Error("lattice spacing must be > 0");
  if (dt == 0.0) dt = dx;
  if (!(dt > 0.0) || dt > dx * (1.0 + 1e-12))
    throw Error("lattice requires 0 < dt <= dx");
  if (!window.valid() || window.t_hi <= window.t_lo ||
      window.x_hi <= window.x_lo)
    throw Error("lattice window must have positive extent");
  Lattice lat;
  lat.dt = dt;
  lat.dx = dx;
  lat.nt = span_count(window.t_lo, window.t_hi, dt);
  lat.nx = span_count(window.x_lo, window.x_hi, dx);
  lat.window = window;
  lat.window.t_hi = window.t_lo + (lat.nt - 1) * dt;
  lat.window.x_hi = window.x_lo + (lat.nx - 1) * dx;
  return lat;
}

LatticeField solve_retarded(const SmearingFunction& f, double mass,
                            const Lattice& lat, ExecPolicy exec) {
  require_cone_inside(f.support(), lat, true);
  return march(lat, mass,
               [&](int i, int j) { return smearing_value(f, lat.node(i, j)); },
               exec);
}

LatticeField solve_advanced(const SmearingFunction& f, double mass,
                            const Lattice& lat, ExecPolicy exec) {
  require_cone_inside(f.support(), lat, false);
  // time reflection maps the advanced problem onto the retarded one
  const int nt = lat.nt;
  LatticeField rev =
      march(lat, mass,
            [&](int i, int j) {
              return smearing_value(f, lat.node(nt - 1 - i, j));
            },
            exec);
  LatticeField out;
  out.lat = lat;
  out.values.resize(rev.values.size());
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < lat.nx; ++j) out.at(i, j) = rev.at(nt - 1 - i, j);
  return out;
}

LatticeField generate_solution(const SmearingFunction& f, double mass,
                               const Lattice& lat, ExecPolicy exec) {
  LatticeField ret = solve_retarded(f, mass, lat, exec);
  LatticeField adv = solve_advanced(f, mass, lat, exec);
  for (std::size_t i = 0; i < ret.values.size(); ++i)
    ret.values[i] -= adv.values[i];
  return ret;
}

LatticeField discrete_wave_op(const LatticeField& phi, double mass) {
  const Lattice& lat = phi.lat;
  LatticeField out;
  out.lat = lat;
  out.values.assign(phi.values.size(), 0.0);
  const double idt2 = 1.0 / (lat.dt * lat.dt);
  const double idx2 = 1.0 / (lat.dx * lat.dx);
  const double m2 = mass * mass;
  for (int i = 1; i + 1 < lat.nt; ++i)
    for (int j = 1; j + 1 < lat.nx; ++j) {
      out.at(i, j) =
          (phi.at(i + 1, j) - 2.0 * phi.at(i, j) + phi.at(i - 1, j)) * idt2 -
          (phi.at(i, j + 1) - 2.0 * phi.at(i, j) + phi.at(i, j - 1)) * idx2 +
          m2 * phi.at(i, j);
    }
  return out;
}

double lattice_delta(const SmearingFunction& f, const SmearingFunction& g,
                     double mass, const Lattice& lat, ExecPolicy exec) {
  // generate from the second argument and weight with the first so the
  // value carries the same orientation as the direct quadrature
  LatticeField sol = generate_solution(g, mass, lat, exec);
  const Rect fs = f.support();
  double acc = 0.0;
  for (int i = 0; i < lat.nt; ++i) {
    if (lat.t(i) < fs.t_lo || lat.t(i) > fs.t_hi) continue;
    double row = 0.0;
    for (int j = 0; j < lat.nx; ++j) {
      const Point p = lat.node(i, j);
      if (p.x < fs.x_lo || p.x > fs.x_hi) continue;
      row += smearing_value(f, p) * sol.at(i, j);
    }
    acc += row;
  }
  return acc * lat.dt * lat.dx;
}

// Staggered quadratic form: squared forward time difference plus the
// products of adjacent-row gradients and values. This is the exact
// invariant of the source-free three-term recurrence, so any drift at all
// flags a scheme or boundary bug; it sits within O(dt^2) of the continuum
// energy.
double lattice_energy(const LatticeField& phi, int i, double mass) {
  const Lattice& lat = phi.lat;
  if (i < 0 || i + 1 >= lat.nt) throw Error("energy slice needs a next row");
  const double m2 = mass * mass;
  double e = 0.0;
  for (int j = 0; j + 1 < lat.nx; ++j) {
    const double dtphi = (phi.at(i + 1, j) - phi.at(i, j)) / lat.dt;
    const double dxa = (phi.at(i, j + 1) - phi.at(i, j)) / lat.dx;
    const double dxb = (phi.at(i + 1, j + 1) - phi.at(i + 1, j)) / lat.dx;
    e += 0.5 *
         (dtphi * dtphi + dxa * dxb + m2 * phi.at(i, j) * phi.at(i + 1, j));
  }
  return e * lat.dx;
}

SampledFunction move_support(const SmearingFunction& f, double mass,
                             const Lattice& lat, const WindowSpec& w,
                             ExecPolicy exec) {
  if (std::abs(lat.dt - lat.dx) > 1e-15)
    throw Error("mover requires dt == dx so the output grid is square");
  check_window_spec(lat, w);
  LatticeField phi = generate_solution(f, mass, lat, exec);
  return windowed_residual(phi, mass, w);
}

ScatterResult scatter_first_order(const SmearingFunction& f, double mass,
                                  const Lattice& lat,
                                  const InteractionSpec& inter,
                                  const WindowSpec& w, ExecPolicy exec) {
  if (std::abs(lat.dt - lat.dx) > 1e-15)
    throw Error("mover requires dt == dx so the output grid is square");
  check_window_spec(lat, w);
  const Rect L = inter.chi.support();
  if (w.t1 <= L.t_hi)
    throw Error("scatter slab must start after the coupling region");
  require_cone_inside(L, lat, true);

  LatticeField phi0 = generate_solution(f, mass, lat, exec);
  LatticeField src1;
  src1.lat = lat;
  src1.values.assign(phi0.values.size(), 0.0);
  for (int i = 0; i < lat.nt; ++i)
    for (int j = 0; j < lat.nx; ++j) {
      const double c = eval_bump(inter.chi, lat.node(i, j));
      if (c != 0.0) src1.at(i, j) = c * phi0.at(i, j) * phi0.at(i, j);
    }
  LatticeField phi1 = solve_retarded_grid(src1, mass, exec);

  ScatterResult out;
  out.h0 = windowed_residual(phi0, mass, w);
  out.h1 = windowed_residual(phi1, mass, w);

  // common block hosting both orders
  const double t_lo = std::min(out.h0.t0, out.h1.t0);
  const double x_lo = std::min(out.h0.x0, out.h1.x0);
  const double t_hi = std::max(out.h0.t0 + (out.h0.nt - 1) * out.h0.h,
                               out.h1.t0 + (out.h1.nt - 1) * out.h1.h);
  const double x_hi = std::max(out.h0.x0 + (out.h0.nx - 1) * out.h0.h,
                               out.h1.x0 + (out.h1.nx - 1) * out.h1.h);
  SampledFunction h;
  h.h = lat.dx;
  h.t0 = t_lo;
  h.x0 = x_lo;
  h.nt = (int)std::lround((t_hi - t_lo) / lat.dx) + 1;
  h.nx = (int)std::lround((x_hi - x_lo) / lat.dx) + 1;
  h.values.assign((std::size_t)h.nt * h.nx, 0.0);
  auto add = [&](const SampledFunction& part, double scale) {
    const int di = (int)std::lround((part.t0 - t_lo) / lat.dx);
    const int dj = (int)std::lround((part.x0 - x_lo) / lat.dx);
    for (int i = 0; i < part.nt; ++i)
      for (int j = 0; j < part.nx; ++j)
        h.at(i + di, j + dj) += scale * part.at(i, j);
  };
  add(out.h0, 1.0);
  add(out.h1, inter.kappa);
  out.h = std::move(h);
  return out;
}

double effective_delta(const SampledFunction& h, const SmearingFunction& g,
                       double mass, const QuadratureConfig& q,
                       ExecPolicy exec) {
  return delta_bilinear(SmearingFunction(h), g, DeltaKernel{mass}, q, exec);
}

}  // namespace qfup
