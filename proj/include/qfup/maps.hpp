#pragma once

#include <variant>
#include <vector>

#include "qfup/algebra.hpp"

namespace qfup {

struct KickField {
  LabelId field = -1;
  double strength = 0.0;
};

struct KickFieldSquared {
  LabelId field = -1;
};

struct GaussianMeasureField {
  LabelId field = -1;
  double sigma = 1.0;
};

// Complex profile samples on a uniform grid; construction rescales to
// unit L2 norm so the induced map is trace preserving.
struct SampledKrausProfile {
  double beta0 = 0.0;
  double dbeta = 1.0;
  std::vector<Complex> values;

  static SampledKrausProfile normalized(double beta0, double dbeta,
                                        std::vector<Complex> values);
  // profile exp(-beta^2/(4 sigma^2)) / (2 pi sigma^2)^{1/4} sampled over
  // |beta| <= halfspan*sigma at spacing*sigma
  static SampledKrausProfile gaussian(double sigma, double halfspan = 10.0,
                                      double spacing = 0.002);
  // rms width of |G|^2; sets finite-difference steps
  double width() const;
};

struct GeneralMeasureField {
  LabelId field = -1;
  SampledKrausProfile profile;
};

struct GaussianMeasureCommutingPoly {
  OperatorPoly poly;
  double sigma = 1.0;
};

struct GaussianMeasureJordanPair {
  LabelId f1 = -1, f2 = -1;
  double sigma = 1.0;
};

struct SelectiveGaussian {
  LabelId field = -1;
  double sigma = 1.0;
  double a = 0.0, b = 0.0;  // +-infinity allowed
};

struct LoccConditional {
  LabelId f1 = -1, f2 = -1;  // measured label, conditionally measured label
  double sigma = 1.0;
  double a = 0.0, b = 0.0;
};

using MapVariant =
    std::variant<KickField, KickFieldSquared, GaussianMeasureField,
                 GeneralMeasureField, GaussianMeasureCommutingPoly,
                 GaussianMeasureJordanPair, SelectiveGaussian, LoccConditional>;

struct UpdateMap {
  MapVariant op;
  RegionSet region;  // empty means: use the union of member supports

  bool is_selective() const {
    return std::holds_alternative<SelectiveGaussian>(op);
  }
  // labels of the map's member functions
  std::vector<LabelId> member_labels() const;
  // declared region, or the member-support union when none was declared
  RegionSet effective_region(const PairingTable& table) const;
};

// Checks the variant's own invariants (positive widths, commuting poly
// labels, Jordan pair coupling nonzero, declared region containing the
// member supports). Throws on violation.
void validate_map(const UpdateMap& m, const PairingTable& table);

// Transforms the jet of the generator of `w.base`. Kicks substitute into
// coefficients and multiply by their phase jet; measurement variants
// multiply by their multiplier jet and require every label already in the
// coefficients to commute with the map's members.
WeylJet apply(const UpdateMap& m, const WeylJet& w, const PairingTable& table);

// Maps listed in the order they hit the state; they hit operators in
// reverse.
struct Composition {
  std::vector<UpdateMap> maps;
};

Composition compose(std::vector<UpdateMap> maps);
WeylJet apply_composition(const Composition& c, const WeylJet& w,
                          const PairingTable& table);

// Overlap autocorrelation H(t) = integral G(beta)* G(beta + t) dbeta with
// the shifted profile linearly interpolated; shifts clearing the grid
// entirely give 0.
Complex h_function(const SampledKrausProfile& g, double t);

// eta(t) = (2 pi)^{-1/2} integral e^{-x^2/2} e^{i (e^{-x r} - 1) t} dx,
// adaptive quadrature over |x| <= 12 (Gaussian weight leaves < 1e-30
// outside).
Complex eta_function(double t, double r);

// Chance that a width-sigma readout of phi(f) lands in [a, b] on the
// given state: Phi(b/s) - Phi(a/s) with s^2 = cov(f, f) + sigma^2.
double selective_probability(LabelId f, double sigma, double a, double b,
                             const GaussianState& state);

// 1 when lambda and lambda + s fall in the same width-w bin [n w, (n+1) w).
int bin_overlap_profile(double w, double s, double lambda);

}  // namespace qfup
