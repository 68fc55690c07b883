#include "qfup/algebra.hpp"

#include <algorithm>
#include <cmath>

#include "qfup/errors.hpp"

namespace qfup {

namespace {

constexpr Complex kI{0.0, 1.0};

bool infinite(double v) { return std::isinf(v); }

}  // namespace

OperatorPoly OperatorPoly::constant(Complex c) {
  OperatorPoly p;
  if (c != 0.0) p.terms_[Word{}] = c;
  return p;
}

OperatorPoly OperatorPoly::label(LabelId id) {
  OperatorPoly p;
  p.terms_[Word{{id}, {}}] = 1.0;
  return p;
}

OperatorPoly OperatorPoly::atom(const ErfAtom& a) {
  if (a.sigma <= 0.0) throw Error("bounded factor needs positive sigma");
  if (infinite(a.c)) {
    // erf((y -+ inf)/...) degenerates to -+1; derivatives vanish
    if (a.n == 0) return constant(a.c > 0 ? -1.0 : 1.0);
    return {};
  }
  OperatorPoly p;
  p.terms_[Word{{}, {a}}] = 1.0;
  return p;
}

OperatorPoly& OperatorPoly::operator+=(const OperatorPoly& o) {
  for (const auto& [w, c] : o.terms_) add_term(w, c);
  return *this;
}

OperatorPoly& OperatorPoly::operator-=(const OperatorPoly& o) {
  for (const auto& [w, c] : o.terms_) add_term(w, -c);
  return *this;
}

OperatorPoly& OperatorPoly::operator*=(Complex s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [w, c] : terms_) c *= s;
  return *this;
}

bool OperatorPoly::is_zero(double tol) const {
  for (const auto& [w, c] : terms_)
    if (std::abs(c) > tol) return false;
  return true;
}

bool OperatorPoly::is_constant(double tol) const {
  for (const auto& [w, c] : terms_)
    if (!(w.labels.empty() && w.atoms.empty()) && std::abs(c) > tol)
      return false;
  return true;
}

Complex OperatorPoly::constant_part() const {
  auto it = terms_.find(Word{});
  return it == terms_.end() ? Complex{0.0} : it->second;
}

int OperatorPoly::degree() const {
  int d = 0;
  for (const auto& [w, c] : terms_) d = std::max(d, w.degree());
  return d;
}

double OperatorPoly::label_weight(LabelId id) const {
  double m = 0.0;
  for (const auto& [w, c] : terms_) {
    bool mentions = std::find(w.labels.begin(), w.labels.end(), id) !=
                    w.labels.end();
    for (const ErfAtom& a : w.atoms) mentions = mentions || a.label == id;
    if (mentions) m = std::max(m, std::abs(c));
  }
  return m;
}

std::vector<LabelId> OperatorPoly::mentioned_labels() const {
  std::vector<LabelId> ids;
  for (const auto& [w, c] : terms_) {
    ids.insert(ids.end(), w.labels.begin(), w.labels.end());
    for (const ErfAtom& a : w.atoms) ids.push_back(a.label);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

Complex OperatorPoly::evaluate(std::span<const double> values_by_label) const {
  Complex acc = 0.0;
  for (const auto& [w, c] : terms_) {
    Complex term = c;
    for (LabelId a : w.labels) term *= values_by_label[(size_t)a];
    for (const ErfAtom& a : w.atoms)
      term *= erf_atom_value(a, values_by_label[(size_t)a.label]);
    acc += term;
  }
  return acc;
}

void OperatorPoly::add_term(Word w, Complex c) {
  if (c == 0.0) return;
  auto [it, inserted] = terms_.emplace(std::move(w), c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0.0) terms_.erase(it);
  }
}

double zero_pairing_tolerance(const PairingTable& table) {
  return 1e-12 * table.delta_scale();
}

namespace {

// First adjacent position violating the canonical order (labels ascending,
// then atoms ascending); npos when canonical.
size_t first_disorder(const std::vector<WordElem>& e) {
  for (size_t i = 0; i + 1 < e.size(); ++i) {
    const WordElem& a = e[i];
    const WordElem& b = e[i + 1];
    if (!a.is_atom && !b.is_atom) {
      if (a.label > b.label) return i;
    } else if (a.is_atom && !b.is_atom) {
      return i;
    } else if (a.is_atom && b.is_atom) {
      if (b.atom < a.atom) return i;
    }
  }
  return (size_t)-1;
}

}  // namespace

OperatorPoly normal_order(std::span<const RawWord> raw,
                          const PairingTable& table) {
  const double ztol = zero_pairing_tolerance(table);
  OperatorPoly out;
  std::vector<RawWord> work(raw.begin(), raw.end());
  while (!work.empty()) {
    RawWord w = std::move(work.back());
    work.pop_back();
    if (w.coeff == 0.0) continue;
    // fold degenerate atoms before anything else
    bool dead = false;
    for (size_t i = 0; i < w.elems.size();) {
      const WordElem& e = w.elems[i];
      if (e.is_atom && infinite(e.atom.c)) {
        if (e.atom.n == 0) {
          w.coeff *= (e.atom.c > 0 ? -1.0 : 1.0);
          w.elems.erase(w.elems.begin() + i);
        } else {
          dead = true;
          break;
        }
      } else {
        ++i;
      }
    }
    if (dead) continue;
    int deg = 0;
    for (const WordElem& e : w.elems) deg += e.is_atom ? 0 : 1;
    if (deg > kMaxDegree)
      throw Error("operator degree bound exceeded (max " +
                  std::to_string(kMaxDegree) + ")");
    const size_t i = first_disorder(w.elems);
    if (i == (size_t)-1) {
      Word key;
      for (const WordElem& e : w.elems)
        if (e.is_atom)
          key.atoms.push_back(e.atom);
        else
          key.labels.push_back(e.label);
      out.add_term(std::move(key), w.coeff);
      continue;
    }
    const WordElem a = w.elems[i];
    const WordElem b = w.elems[i + 1];
    if (!a.is_atom && !b.is_atom) {
      // phi(a) phi(b) = phi(b) phi(a) + i pairing(a, b)
      const double d = table.delta(a.label, b.label);
      RawWord swapped = w;
      std::swap(swapped.elems[i], swapped.elems[i + 1]);
      work.push_back(std::move(swapped));
      if (std::fabs(d) > 0.0) {
        RawWord corr = w;
        corr.elems.erase(corr.elems.begin() + i, corr.elems.begin() + i + 2);
        corr.coeff *= kI * d;
        work.push_back(std::move(corr));
      }
    } else if (a.is_atom && !b.is_atom) {
      // F(phi(p)) phi(b) = phi(b) F(phi(p)) - i pairing(b, p) F'(phi(p))
      const double d = table.delta(b.label, a.atom.label);
      RawWord swapped = w;
      std::swap(swapped.elems[i], swapped.elems[i + 1]);
      work.push_back(std::move(swapped));
      if (std::fabs(d) > 0.0) {
        RawWord corr = w;
        corr.elems.erase(corr.elems.begin() + i + 1);
        corr.elems[i].atom.n += 1;
        corr.coeff *= -kI * d;
        work.push_back(std::move(corr));
      }
    } else {
      // two bounded factors: reorderable only when their bases commute
      const bool same = a.atom.label == b.atom.label;
      const double d = same ? 0.0 : table.delta(a.atom.label, b.atom.label);
      if (std::fabs(d) > ztol)
        throw Error(
            "commutation precondition violated: bounded factors on labels '" +
            table.name(a.atom.label) + "' and '" + table.name(b.atom.label) +
            "' have nonzero pairing " + std::to_string(d));
      RawWord swapped = w;
      std::swap(swapped.elems[i], swapped.elems[i + 1]);
      work.push_back(std::move(swapped));
    }
  }
  return out;
}

OperatorPoly poly_mul(const OperatorPoly& a, const OperatorPoly& b,
                      const PairingTable& table) {
  std::vector<RawWord> raw;
  for (const auto& [wa, ca] : a.terms())
    for (const auto& [wb, cb] : b.terms()) {
      RawWord r;
      r.coeff = ca * cb;
      for (LabelId l : wa.labels) r.elems.push_back(WordElem::make_label(l));
      for (const ErfAtom& t : wa.atoms) r.elems.push_back(WordElem::make_atom(t));
      for (LabelId l : wb.labels) r.elems.push_back(WordElem::make_label(l));
      for (const ErfAtom& t : wb.atoms) r.elems.push_back(WordElem::make_atom(t));
      raw.push_back(std::move(r));
    }
  return normal_order(raw, table);
}

OperatorPoly shift_labels(const OperatorPoly& p, LabelId f, double lambda,
                          const PairingTable& table) {
  OperatorPoly out;
  for (const auto& [w, c] : p.terms()) {
    const int n = (int)w.labels.size();
    std::vector<double> shift(n);
    for (int i = 0; i < n; ++i)
      shift[i] = lambda * table.delta(w.labels[i], f);
    // expand the product of (phi(a_i) + shift_i) over kept subsets; a
    // subsequence of a sorted label list stays sorted
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      Word nw;
      Complex coeff = c;
      for (int i = 0; i < n; ++i) {
        if (mask & (1u << i))
          nw.labels.push_back(w.labels[i]);
        else
          coeff *= shift[i];
      }
      if (coeff == 0.0) continue;
      nw.atoms = w.atoms;
      for (ErfAtom& a : nw.atoms)
        if (!infinite(a.c)) a.c -= lambda * table.delta(a.label, f);
      std::sort(nw.atoms.begin(), nw.atoms.end());
      out.add_term(std::move(nw), coeff);
    }
  }
  return out;
}

Complex GaussianState::two_point(LabelId a, LabelId b) const {
  if (!table || !table->has_covariance())
    throw Error("state moments need a pairing table built with covariance");
  return {table->covariance(a, b), 0.5 * table->delta(a, b)};
}

namespace {

// E[P(W) exp(-W^2 / (2 sigma^2))] for W ~ N(-c, v), by completing the
// square: (sigma/s) exp(-c^2/(2 s^2)) E[P(Z)], Z ~ N(mu, tau^2) with
// s^2 = sigma^2 + v, mu = -c sigma^2 / s^2, tau^2 = sigma^2 v / s^2.
double gaussian_weighted_poly(const std::vector<double>& coeffs, double c,
                              double sigma, double v) {
  const double s2 = sigma * sigma + v;
  const double mu = -c * sigma * sigma / s2;
  const double tau2 = sigma * sigma * v / s2;
  // central-moment recursion for E[Z^k]
  std::vector<double> mom(coeffs.size(), 0.0);
  double acc = 0.0;
  for (size_t k = 0; k < coeffs.size(); ++k) {
    if (k == 0)
      mom[k] = 1.0;
    else if (k == 1)
      mom[k] = mu;
    else
      mom[k] = mu * mom[k - 1] + (double)(k - 1) * tau2 * mom[k - 2];
    acc += coeffs[k] * mom[k];
  }
  return (sigma / std::sqrt(s2)) * std::exp(-c * c / (2.0 * s2)) * acc;
}

// coefficient vector of P_{k-1} in d^k/dy^k erf((y - c)/(sqrt2 sigma)) =
// sqrt(2/pi)/sigma * P_{k-1}(w) exp(-w^2/(2 sigma^2)), w = y - c
std::vector<double> erf_derivative_poly(int k, double sigma) {
  std::vector<double> p{1.0};
  const double is2 = 1.0 / (sigma * sigma);
  for (int j = 1; j < k; ++j) {
    std::vector<double> q(p.size() + 1, 0.0);
    for (size_t i = 0; i + 1 < p.size() + 1; ++i) {
      if (i + 1 < p.size()) q[i] += (double)(i + 1) * p[i + 1];  // P'
      q[i + 1] -= p[i] * is2;                                    // -(w/s^2) P
    }
    p = std::move(q);
  }
  return p;
}

// E[A_k(Y)] for Y ~ N(0, v) where A is the atom's base function family.
double atom_moment(const ErfAtom& a, int extra_derivs, double v) {
  const int k = a.n + extra_derivs;
  if (k == 0) return std::erf(-a.c / std::sqrt(2.0 * (a.sigma * a.sigma + v)));
  const std::vector<double> p = erf_derivative_poly(k, a.sigma);
  return std::sqrt(2.0 / 3.14159265358979323846) / a.sigma *
         gaussian_weighted_poly(p, a.c, a.sigma, v);
}

// Pairings-and-singles recursion over the label list; `depth` counts
// contractions taken against the atom.
Complex wick_rec(const std::vector<LabelId>& labels, size_t used_mask,
                 int depth, const ErfAtom* atom, const GaussianState& st) {
  size_t first = labels.size();
  for (size_t i = 0; i < labels.size(); ++i)
    if (!(used_mask & ((size_t)1 << i))) {
      first = i;
      break;
    }
  if (first == labels.size()) {
    if (!atom) return depth == 0 ? 1.0 : 0.0;
    return atom_moment(*atom, depth,
                       st.table->covariance(atom->label, atom->label));
  }
  Complex acc = 0.0;
  const size_t mask1 = used_mask | ((size_t)1 << first);
  for (size_t j = first + 1; j < labels.size(); ++j) {
    if (mask1 & ((size_t)1 << j)) continue;
    acc += st.two_point(labels[first], labels[j]) *
           wick_rec(labels, mask1 | ((size_t)1 << j), depth, atom, st);
  }
  if (atom)
    acc += st.two_point(labels[first], atom->label) *
           wick_rec(labels, mask1, depth + 1, atom, st);
  return acc;
}

}  // namespace

Complex wick_expectation(const OperatorPoly& p, const GaussianState& state) {
  if (!state.table) throw Error("wick_expectation: state has no table");
  Complex acc = 0.0;
  for (const auto& [w, c] : p.terms()) {
    if (w.atoms.size() > 1)
      throw Error(
          "expectation of a word with more than one bounded factor is not "
          "supported");
    const ErfAtom* atom = w.atoms.empty() ? nullptr : &w.atoms.front();
    acc += c * wick_rec(w.labels, 0, 0, atom, state);
  }
  return acc;
}

WeylJet WeylJet::trivial(LabelId base, int order) {
  WeylJet j;
  j.base = base;
  j.order = order;
  j.c.assign((size_t)order + 1, OperatorPoly{});
  j.c[0] = OperatorPoly::constant(1.0);
  return j;
}

WeylJet jet_multiply(const WeylJet& a, const WeylJet& b,
                     const PairingTable& table) {
  WeylJet r;
  r.base = a.base;
  r.order = a.order;
  r.c.assign((size_t)a.order + 1, OperatorPoly{});
  for (int k = 0; k <= a.order; ++k)
    for (int i = 0; i <= k; ++i) {
      if (i >= (int)a.c.size()) continue;
      if (k - i >= (int)b.c.size()) continue;
      r.c[k] += poly_mul(a.c[i], b.c[k - i], table);
    }
  return r;
}

OperatorPoly jet_extract(const WeylJet& jet, int k, const PairingTable& table) {
  if (k < 0 || k > 2 || k > jet.order)
    throw Error("jet_extract supports moment orders 0..2 within the jet order");
  if (k == 0) return jet.c[0];
  const OperatorPoly base = OperatorPoly::label(jet.base);
  if (k == 1)
    return poly_mul(jet.c[0], base, table) + (-kI) * jet.c[1];
  OperatorPoly out = poly_mul(jet.c[0], poly_mul(base, base, table), table);
  out += (-2.0 * kI) * poly_mul(jet.c[1], base, table);
  out += (-2.0) * jet.c[2];
  return out;
}

double erf_atom_value(const ErfAtom& a, double y) {
  if (a.sigma <= 0.0) throw Error("bounded factor needs positive sigma");
  if (infinite(a.c)) return a.n == 0 ? (a.c > 0 ? -1.0 : 1.0) : 0.0;
  const double w = y - a.c;
  if (a.n == 0) return std::erf(w / (1.41421356237309504880 * a.sigma));
  const std::vector<double> p = erf_derivative_poly(a.n, a.sigma);
  double pw = 0.0;
  for (size_t i = p.size(); i-- > 0;) pw = pw * w + p[i];
  return std::sqrt(2.0 / 3.14159265358979323846) / a.sigma * pw *
         std::exp(-w * w / (2.0 * a.sigma * a.sigma));
}

}  // namespace qfup
