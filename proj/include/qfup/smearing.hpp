#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "qfup/functions.hpp"
#include "qfup/geometry.hpp"

namespace qfup {

// Commutator kernel parameters; mass = 0 selects the step-function form.
struct DeltaKernel {
  double mass = 0.0;
};

// Pointwise commutator kernel value. Antisymmetric under swapping x and y,
// zero outside the closed cone, sign +1 when x lies in the causal future
// of y; the cone boundary takes the inside value and coincident points
// take the future sign (both measure zero under smearing).
double pauli_jordan_point(const DeltaKernel& k, Point x, Point y);

struct QuadratureConfig {
  double dx = 0.05;    // base cell size for refinable grids
  int levels = 8;      // halvings tried before giving up
  double tol = 1e-6;   // stop threshold between refinements: relative for
                       // the commutator pairing (values span many orders),
                       // absolute for the covariance integral
  double kmax = 60.0;  // momentum cutoff for covariance integrals
};

enum class ExecPolicy { serial, parallel };

// Double-smeared commutator kernel. Midpoint grids on bump supports are
// refined (and the final pair of levels extrapolated at the observed rate)
// until successive levels agree within tol; sampled functions contribute
// their own fixed node set. Throws ConvergenceError when refinement runs
// out of levels, except when neither side is refinable (two sampled
// functions give a single fixed-grid value).
double delta_bilinear(const SmearingFunction& f, const SmearingFunction& g,
                      const DeltaKernel& k, const QuadratureConfig& q,
                      ExecPolicy exec = ExecPolicy::parallel);

struct VacuumResult {
  double value = 0.0;       // symmetric two-point pairing
  double imag_part = 0.0;   // antisymmetric part, equals delta/2; cross-check
  double tail_bound = 0.0;  // decay-fit estimate of the truncated |k| > kmax mass
  double kmax = 0.0;
  int nodes = 0;
};

// Symmetrized vacuum two-point pairing for mass > 0, from the momentum-
// space integral truncated at |k| <= kmax; the unresolved tail is
// estimated from the integrand's decay slope and reported.
VacuumResult vacuum_covariance_detail(const SmearingFunction& f,
                                      const SmearingFunction& g, double mass,
                                      const QuadratureConfig& q,
                                      ExecPolicy exec = ExecPolicy::parallel);
double vacuum_covariance(const SmearingFunction& f, const SmearingFunction& g,
                         double mass, const QuadratureConfig& q,
                         ExecPolicy exec = ExecPolicy::parallel);

// Named smearing functions with cached pairwise pairings. Label ids are
// dense indices in registration order.
class PairingTable {
 public:
  PairingTable(double mass, QuadratureConfig quad)
      : mass_(mass), quad_(quad) {}

  int add(const std::string& name, SmearingFunction fn);
  int find(const std::string& name) const;  // -1 when absent
  int size() const { return (int)names_.size(); }
  const std::string& name(int id) const { return names_.at(id); }
  const SmearingFunction& function(int id) const { return fns_.at(id); }
  RegionSet support(int id) const;
  double mass() const { return mass_; }
  const QuadratureConfig& quadrature() const { return quad_; }

  using PairFn =
      std::function<double(const SmearingFunction&, const SmearingFunction&)>;

  // Fills the antisymmetric pairing block (and optionally the symmetric
  // covariance block) with the default kernels, or with injected backends.
  // Building with covariance checks positivity of cov + (i/2) pairing and
  // rejects indefinite data, reporting the offending eigenvalue.
  void build(bool with_covariance, ExecPolicy exec = ExecPolicy::parallel);
  void build_with(const PairFn& delta_fn, const PairFn* cov_fn);

  bool built() const { return built_; }
  bool has_covariance() const { return has_cov_; }
  double delta(int i, int j) const;
  double covariance(int i, int j) const;
  // largest |pairing| entry, floored at 1; scales zero-tests on pairings
  double delta_scale() const;

 private:
  double mass_;
  QuadratureConfig quad_;
  std::vector<std::string> names_;
  std::vector<SmearingFunction> fns_;
  std::vector<double> delta_, cov_;  // row-major size x size
  bool built_ = false, has_cov_ = false;
};

}  // namespace qfup
