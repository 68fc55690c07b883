#pragma once

#include <compare>
#include <complex>
#include <map>
#include <span>
#include <vector>

#include "qfup/smearing.hpp"

namespace qfup {

using Complex = std::complex<double>;
using LabelId = int;

// Largest number of field factors a word may carry.
inline constexpr int kMaxDegree = 4;

// Bounded factor d^n/dy^n erf((y - c) / (sqrt(2) sigma)) evaluated at
// y = phi(label). Closed under differentiation, which is what makes
// normal ordering against field factors exact.
struct ErfAtom {
  LabelId label = -1;
  int n = 0;
  double c = 0.0;
  double sigma = 1.0;

  friend auto operator<=>(const ErfAtom&, const ErfAtom&) = default;
};

struct WordElem {
  bool is_atom = false;
  LabelId label = -1;
  ErfAtom atom;

  static WordElem make_label(LabelId id) { return {false, id, {}}; }
  static WordElem make_atom(ErfAtom a) { return {true, -1, a}; }
};

// Canonical word: field labels ascending, then atoms sorted; comparisons
// give the deterministic term order of a polynomial.
struct Word {
  std::vector<LabelId> labels;
  std::vector<ErfAtom> atoms;

  int degree() const { return (int)labels.size(); }
  friend auto operator<=>(const Word&, const Word&) = default;
};

struct RawWord {
  Complex coeff;
  std::vector<WordElem> elems;  // any order; normal_order canonicalizes
};

class OperatorPoly {
 public:
  OperatorPoly() = default;

  static OperatorPoly constant(Complex c);
  static OperatorPoly label(LabelId id);
  // folds atoms with infinite offset into the constants they degenerate to
  static OperatorPoly atom(const ErfAtom& a);

  OperatorPoly& operator+=(const OperatorPoly& o);
  OperatorPoly& operator-=(const OperatorPoly& o);
  OperatorPoly& operator*=(Complex s);
  friend OperatorPoly operator+(OperatorPoly a, const OperatorPoly& b) {
    return a += b;
  }
  friend OperatorPoly operator-(OperatorPoly a, const OperatorPoly& b) {
    return a -= b;
  }
  friend OperatorPoly operator*(Complex s, OperatorPoly p) { return p *= s; }

  bool is_zero(double tol = 0.0) const;
  // true when the polynomial is a constant (possibly zero)
  bool is_constant(double tol = 0.0) const;
  Complex constant_part() const;
  int degree() const;
  const std::map<Word, Complex>& terms() const { return terms_; }
  // largest |coefficient| over terms whose word mentions the label (as a
  // field factor or an atom base)
  double label_weight(LabelId id) const;
  std::vector<LabelId> mentioned_labels() const;

  // numeric evaluation with every phi(label) replaced by a real value;
  // atoms evaluate through their defining functions
  Complex evaluate(std::span<const double> values_by_label) const;

  void add_term(Word w, Complex c);  // w must already be canonical

 private:
  std::map<Word, Complex> terms_;
};

// Rewrites products of field factors and bounded atoms into canonical
// order. Field swaps use the pairing; moving an atom past a field uses
//   [phi(a), F(phi(b))] = i pairing(a, b) F'(phi(b)),
// and two atoms may swap only when their bases have zero pairing (or are
// equal); anything else reports a commutation precondition violation.
OperatorPoly normal_order(std::span<const RawWord> raw,
                          const PairingTable& table);

// Normal-ordered product of canonical polynomials.
OperatorPoly poly_mul(const OperatorPoly& a, const OperatorPoly& b,
                      const PairingTable& table);

// Substitutes phi(a) -> phi(a) + lambda * pairing(a, f) in every factor;
// atoms absorb the shift into their offset.
OperatorPoly shift_labels(const OperatorPoly& p, LabelId f, double lambda,
                          const PairingTable& table);

// Mean-zero Gaussian state over the table's functions; moments come from
// the covariance block plus (i/2) pairing.
struct GaussianState {
  const PairingTable* table = nullptr;

  Complex two_point(LabelId a, LabelId b) const;
};

// Quasifree moments by pairwise contraction. Words may carry at most one
// atom; its contractions walk the atom's derivatives and reduce to
// closed-form Gaussian integrals.
Complex wick_expectation(const OperatorPoly& p, const GaussianState& state);

// Taylor data of a transformed exponential generator: the stored
// polynomials c[k] multiply t^k (coefficients standing to the LEFT of the
// generator of label `base`).
struct WeylJet {
  LabelId base = -1;
  int order = 2;
  std::vector<OperatorPoly> c;

  static WeylJet trivial(LabelId base, int order = 2);
};

// Coefficient-series product truncated at the jet order; a's coefficients
// stand to the left of b's in every term.
WeylJet jet_multiply(const WeylJet& a, const WeylJet& b,
                     const PairingTable& table);

// Moment polynomial of the transformed field: k = 1 gives the image of
// phi(base), k = 2 of phi(base)^2, k = 0 of the identity.
OperatorPoly jet_extract(const WeylJet& jet, int k, const PairingTable& table);

// Scalar evaluation of the n-th erf derivative at w = y - c (test helper).
double erf_atom_value(const ErfAtom& a, double y);

// Threshold below which a pairing counts as zero for commutation checks.
double zero_pairing_tolerance(const PairingTable& table);

}  // namespace qfup
