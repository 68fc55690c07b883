#pragma once

#include <vector>

#include "qfup/smearing.hpp"

namespace qfup {

// Uniform grid over a closed window; dt <= dx keeps the explicit scheme
// stable, and dt == dx makes the massless propagation exact along
// characteristics.
struct Lattice {
  double dt = 0.0, dx = 0.0;
  Rect window;
  int nt = 0, nx = 0;

  double t(int i) const { return window.t_lo + i * dt; }
  double x(int j) const { return window.x_lo + j * dx; }
  Point node(int i, int j) const { return {t(i), x(j)}; }
};

// Snaps the window's upper edges outward so they land on grid nodes.
Lattice make_lattice(Rect window, double dx, double dt = 0.0);

struct LatticeField {
  Lattice lat;
  std::vector<double> values;  // row-major in t

  double at(int i, int j) const {
    return values[(std::size_t)i * lat.nx + j];
  }
  double& at(int i, int j) { return values[(std::size_t)i * lat.nx + j]; }
};

struct InteractionSpec {
  double kappa = 0.0;
  BumpSpec chi;  // coupling profile, compactly supported
};

// Explicit second-order evolution with zero data before (after) the
// source; the discrete d'Alembertian plus mass term applied to the result
// reproduces the sampled source exactly at interior rows. The source's
// full causal cone must fit inside the window so the boundary columns
// stay identically zero.
LatticeField solve_retarded(const SmearingFunction& f, double mass,
                            const Lattice& lat,
                            ExecPolicy exec = ExecPolicy::parallel);
LatticeField solve_advanced(const SmearingFunction& f, double mass,
                            const Lattice& lat,
                            ExecPolicy exec = ExecPolicy::parallel);

// Retarded minus advanced: the commutator-kernel solution generated by f.
LatticeField generate_solution(const SmearingFunction& f, double mass,
                               const Lattice& lat,
                               ExecPolicy exec = ExecPolicy::parallel);

// Discrete (box + m^2) applied to a field; rows 0 and nt-1 are zero.
LatticeField discrete_wave_op(const LatticeField& phi, double mass);

// Lattice evaluation of the smeared commutator pairing: integrates f
// against the solution generated by g, converging to the quadrature value
// at O(dx^2) with matching sign convention.
double lattice_delta(const SmearingFunction& f, const SmearingFunction& g,
                     double mass, const Lattice& lat,
                     ExecPolicy exec = ExecPolicy::parallel);

// Discrete field energy of slice i: the staggered invariant of the
// leapfrog recurrence (forward time difference squared plus adjacent-row
// gradient and mass products). Conserved exactly while the evolution is
// source-free; within O(dt^2) of the continuum energy.
double lattice_energy(const LatticeField& phi, int i, double mass);

// Equivalent source supported in the ramp slab [w.t1 - dt, w.t2 + dt]:
// applies the wave operator to ramp(t) * (generated solution of f) and
// trims the exact nonzero block. The result generates the same solution
// as f to the future of the slab.
SampledFunction move_support(const SmearingFunction& f, double mass,
                             const Lattice& lat, const WindowSpec& w,
                             ExecPolicy exec = ExecPolicy::parallel);

struct ScatterResult {
  SampledFunction h;   // h0 + kappa * h1 on the common block
  SampledFunction h0;  // free-field mover output
  SampledFunction h1;  // first-order correction from the coupling region
};

// First-order interacting out-field repackaged as an equivalent source in
// a slab after the coupling region: phi0 generates from f, phi1 solves the
// retarded equation with source chi * phi0^2, and both pass through the
// mover. Valid to second order in kappa; the slab must start after the
// coupling support so it avoids the region's causal past.
ScatterResult scatter_first_order(const SmearingFunction& f, double mass,
                                  const Lattice& lat,
                                  const InteractionSpec& inter,
                                  const WindowSpec& w,
                                  ExecPolicy exec = ExecPolicy::parallel);

// Smeared commutator pairing of a repackaged source against g with the
// free kernel.
double effective_delta(const SampledFunction& h, const SmearingFunction& g,
                       double mass, const QuadratureConfig& q,
                       ExecPolicy exec = ExecPolicy::parallel);

}  // namespace qfup
