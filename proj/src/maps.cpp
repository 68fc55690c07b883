#include "qfup/maps.hpp"

#include <algorithm>
#include <cmath>

#include "qfup/errors.hpp"

namespace qfup {

namespace {

constexpr Complex kI{0.0, 1.0};
constexpr double kPi = 3.14159265358979323846;

}  // namespace

SampledKrausProfile SampledKrausProfile::normalized(
    double beta0, double dbeta, std::vector<Complex> values) {
  if (dbeta <= 0.0 || values.size() < 2)
    throw Error("kraus profile needs a positive spacing and >= 2 samples");
  double n2 = 0.0;
  for (const Complex& v : values) n2 += std::norm(v);
  n2 *= dbeta;
  if (n2 <= 0.0) throw Error("kraus profile has zero norm");
  const double scale = 1.0 / std::sqrt(n2);
  for (Complex& v : values) v *= scale;
  SampledKrausProfile p;
  p.beta0 = beta0;
  p.dbeta = dbeta;
  p.values = std::move(values);
  return p;
}

SampledKrausProfile SampledKrausProfile::gaussian(double sigma,
                                                  double halfspan,
                                                  double spacing) {
  if (sigma <= 0.0) throw Error("gaussian profile needs sigma > 0");
  const double db = spacing * sigma;
  const int half = (int)std::llround(halfspan / spacing);
  std::vector<Complex> v;
  v.reserve(2 * half + 1);
  const double amp = std::pow(2.0 * kPi * sigma * sigma, -0.25);
  for (int i = -half; i <= half; ++i) {
    const double b = i * db;
    v.push_back(amp * std::exp(-b * b / (4.0 * sigma * sigma)));
  }
  return normalized(-half * db, db, std::move(v));
}

double SampledKrausProfile::width() const {
  double m2 = 0.0, n = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    const double b = beta0 + i * dbeta;
    const double w = std::norm(values[i]);
    m2 += b * b * w;
    n += w;
  }
  return std::sqrt(m2 / n);
}

Complex h_function(const SampledKrausProfile& g, double t) {
  const int n = (int)g.values.size();
  const double shift = t / g.dbeta;
  Complex acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double pos = i + shift;
    const double fl = std::floor(pos);
    const int j = (int)fl;
    const double frac = pos - fl;
    Complex gv = 0.0;
    if (j >= 0 && j < n) gv += (1.0 - frac) * g.values[j];
    if (j + 1 >= 0 && j + 1 < n) gv += frac * g.values[j + 1];
    acc += std::conj(g.values[i]) * gv;
  }
  return acc * g.dbeta;
}

namespace {

Complex eta_integrand(double x, double t, double r) {
  const Complex phase = kI * ((std::exp(-x * r) - 1.0) * t);
  return std::exp(-0.5 * x * x) * std::exp(phase);
}

Complex eta_simpson(double a, double b, double t, double r) {
  const double m = 0.5 * (a + b);
  return (b - a) / 6.0 *
         (eta_integrand(a, t, r) + 4.0 * eta_integrand(m, t, r) +
          eta_integrand(b, t, r));
}

Complex eta_adaptive(double a, double b, Complex whole, double t, double r,
                     double tol, int depth) {
  const double m = 0.5 * (a + b);
  const Complex left = eta_simpson(a, m, t, r);
  const Complex right = eta_simpson(m, b, t, r);
  const Complex diff = left + right - whole;
  if (std::abs(diff) <= 15.0 * tol || depth >= 32)
    return left + right + diff / 15.0;
  return eta_adaptive(a, m, left, t, r, tol * 0.5, depth + 1) +
         eta_adaptive(m, b, right, t, r, tol * 0.5, depth + 1);
}

}  // namespace

Complex eta_function(double t, double r) {
  if (!std::isfinite(t) || !std::isfinite(r))
    throw Error("eta_function needs finite arguments");
  // 64 seed panels keep the initial Simpson estimates inside the
  // oscillation scale; the Gaussian weight truncates |x| > 12 below 1e-30
  const int panels = 64;
  const double lo = -12.0, hi = 12.0;
  const double w = (hi - lo) / panels;
  Complex acc = 0.0;
  for (int i = 0; i < panels; ++i) {
    const double a = lo + i * w, b = a + w;
    acc += eta_adaptive(a, b, eta_simpson(a, b, t, r), t, r, 1e-12, 0);
  }
  return acc / std::sqrt(2.0 * kPi);
}

double selective_probability(LabelId f, double sigma, double a, double b,
                             const GaussianState& state) {
  if (sigma <= 0.0) throw Error("selective_probability needs sigma > 0");
  if (a > b) throw Error("selective_probability needs a <= b");
  if (!state.table || !state.table->has_covariance())
    throw Error(
        "selective_probability needs a table built with vacuum covariance");
  const double s =
      std::sqrt(state.table->covariance(f, f) + sigma * sigma);
  auto cdf = [&](double u) {
    if (std::isinf(u)) return u > 0 ? 1.0 : 0.0;
    return 0.5 * std::erfc(-u / (1.41421356237309504880 * s));
  };
  return cdf(b) - cdf(a);
}

int bin_overlap_profile(double w, double s, double lambda) {
  if (w <= 0.0) throw Error("bin_overlap_profile needs w > 0");
  return std::floor(lambda / w) == std::floor((lambda + s) / w) ? 1 : 0;
}

std::vector<LabelId> UpdateMap::member_labels() const {
  return std::visit(
      [](const auto& m) -> std::vector<LabelId> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, KickField> ||
                      std::is_same_v<T, KickFieldSquared> ||
                      std::is_same_v<T, GaussianMeasureField> ||
                      std::is_same_v<T, GeneralMeasureField> ||
                      std::is_same_v<T, SelectiveGaussian>)
          return {m.field};
        else if constexpr (std::is_same_v<T, GaussianMeasureCommutingPoly>)
          return m.poly.mentioned_labels();
        else
          return {m.f1, m.f2};
      },
      op);
}

RegionSet UpdateMap::effective_region(const PairingTable& table) const {
  if (!region.empty()) return region;
  RegionSet r;
  for (LabelId id : member_labels())
    r.rects.push_back(table.function(id).support());
  return r;
}

namespace {

bool rect_inside(const Rect& inner, const Rect& outer) {
  return inner.t_lo >= outer.t_lo && inner.t_hi <= outer.t_hi &&
         inner.x_lo >= outer.x_lo && inner.x_hi <= outer.x_hi;
}

double map_sigma(const MapVariant& v) {
  return std::visit(
      [](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, GaussianMeasureField> ||
                      std::is_same_v<T, GaussianMeasureCommutingPoly> ||
                      std::is_same_v<T, GaussianMeasureJordanPair> ||
                      std::is_same_v<T, SelectiveGaussian> ||
                      std::is_same_v<T, LoccConditional>)
          return m.sigma;
        else
          return 1.0;
      },
      v);
}

}  // namespace

void validate_map(const UpdateMap& m, const PairingTable& table) {
  if (map_sigma(m.op) <= 0.0) throw Error("update map needs sigma > 0");
  const double ztol = zero_pairing_tolerance(table);
  if (const auto* p = std::get_if<GaussianMeasureCommutingPoly>(&m.op)) {
    const auto labels = p->poly.mentioned_labels();
    for (size_t i = 0; i < labels.size(); ++i)
      for (size_t j = i + 1; j < labels.size(); ++j)
        if (std::fabs(table.delta(labels[i], labels[j])) > ztol)
          throw Error("commuting-poly members '" + table.name(labels[i]) +
                      "' and '" + table.name(labels[j]) +
                      "' have nonzero pairing");
    for (const auto& [w, c] : p->poly.terms())
      if (!w.atoms.empty())
        throw Error("commuting-poly must be a plain field polynomial");
  }
  if (const auto* j = std::get_if<GaussianMeasureJordanPair>(&m.op)) {
    if (std::fabs(table.delta(j->f1, j->f2)) <= ztol)
      throw Error("jordan pair members must have nonzero pairing");
  }
  if (const auto* s = std::get_if<SelectiveGaussian>(&m.op)) {
    if (s->a > s->b) throw Error("selective interval needs a <= b");
  }
  if (const auto* l = std::get_if<LoccConditional>(&m.op)) {
    if (l->a > l->b) throw Error("conditional interval needs a <= b");
  }
  if (!m.region.empty()) {
    for (LabelId id : m.member_labels()) {
      const Rect s = table.function(id).support();
      bool inside = false;
      for (const Rect& r : m.region.rects) inside = inside || rect_inside(s, r);
      if (!inside)
        throw Error("declared region does not contain the support of '" +
                    table.name(id) + "'");
    }
  }
}

namespace {

// exp of a commuting jet polynomial Q(t) = sum_{k>=1} q[k] t^k via
// m_k = (1/k) sum_j j q_j m_{k-j}; valid because [Q'(t), Q(t)] = 0 for
// every variant routed through here.
WeylJet exp_series_jet(LabelId base, int order,
                       const std::vector<OperatorPoly>& q,
                       const PairingTable& table) {
  WeylJet m = WeylJet::trivial(base, order);
  for (int k = 1; k <= order; ++k) {
    OperatorPoly acc;
    for (int j = 1; j <= k; ++j) {
      if (j >= (int)q.size()) break;
      acc += (Complex)(double)j * poly_mul(q[j], m.c[k - j], table);
    }
    m.c[k] = (1.0 / k) * acc;
  }
  return m;
}

// measurement maps are not homomorphisms; pulling coefficients out of the
// outcome integral needs them to commute with every member function
void require_commuting_coefficients(const WeylJet& w,
                                    const std::vector<LabelId>& members,
                                    const PairingTable& table) {
  const double ztol = zero_pairing_tolerance(table);
  for (const OperatorPoly& c : w.c)
    for (LabelId l : c.mentioned_labels())
      for (LabelId m : members) {
        if (l == m) continue;
        if (std::fabs(table.delta(l, m)) > ztol)
          throw Error("commutation precondition violated: coefficient label '" +
                      table.name(l) + "' has nonzero pairing with member '" +
                      table.name(m) + "'");
      }
}

OperatorPoly substitute_squared_kick(const OperatorPoly& p, LabelId f,
                                     const PairingTable& table) {
  const double ztol = zero_pairing_tolerance(table);
  std::vector<RawWord> raw;
  for (const auto& [w, c] : p.terms()) {
    for (const ErfAtom& a : w.atoms)
      if (std::fabs(table.delta(f, a.label)) > ztol)
        throw Error(
            "squared kick cannot act on a bounded factor whose base has "
            "nonzero pairing with '" +
            table.name(f) + "'");
    const int n = (int)w.labels.size();
    std::vector<double> s(n);
    for (int i = 0; i < n; ++i) s[i] = -2.0 * table.delta(f, w.labels[i]);
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      RawWord r;
      r.coeff = c;
      for (int i = 0; i < n; ++i) {
        if (mask & (1u << i)) {
          r.elems.push_back(WordElem::make_label(w.labels[i]));
        } else {
          r.coeff *= s[i];
          r.elems.push_back(WordElem::make_label(f));
        }
      }
      if (r.coeff == 0.0) continue;
      for (const ErfAtom& a : w.atoms) r.elems.push_back(WordElem::make_atom(a));
      raw.push_back(std::move(r));
    }
  }
  return normal_order(raw, table);
}

// t-power coefficients of C(labels shifted by t pairing(., base)) - C
std::vector<OperatorPoly> shifted_difference(const OperatorPoly& c,
                                             LabelId base, int order,
                                             const PairingTable& table) {
  std::vector<OperatorPoly> out((size_t)order + 1);
  for (const auto& [w, coeff] : c.terms()) {
    const int n = (int)w.labels.size();
    std::vector<double> d(n);
    for (int i = 0; i < n; ++i) d[i] = table.delta(w.labels[i], base);
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      const int k = n - __builtin_popcount(mask);
      if (k == 0 || k > order) continue;  // k = 0 cancels against -C
      Word nw;
      Complex cc = coeff;
      for (int i = 0; i < n; ++i) {
        if (mask & (1u << i))
          nw.labels.push_back(w.labels[i]);
        else
          cc *= d[i];
      }
      if (cc != 0.0) out[k].add_term(std::move(nw), cc);
    }
  }
  return out;
}

WeylJet multiplier_for(const UpdateMap& m, const WeylJet& w,
                       const PairingTable& table, bool& homomorphic) {
  const LabelId base = w.base;
  const int order = w.order;
  homomorphic = false;
  const double ztol = zero_pairing_tolerance(table);

  if (const auto* k = std::get_if<KickField>(&m.op)) {
    homomorphic = true;
    std::vector<OperatorPoly> q(2);
    q[1] = OperatorPoly::constant(kI * k->strength *
                                  table.delta(base, k->field));
    return exp_series_jet(base, order, q, table);
  }
  if (const auto* k = std::get_if<KickFieldSquared>(&m.op)) {
    homomorphic = true;
    const double d = table.delta(k->field, base);
    std::vector<OperatorPoly> q(3);
    q[1] = (-2.0 * kI * d) * OperatorPoly::label(k->field);
    q[2] = OperatorPoly::constant(-kI * d * d);
    return exp_series_jet(base, order, q, table);
  }
  if (const auto* g = std::get_if<GaussianMeasureField>(&m.op)) {
    const double d = table.delta(g->field, base);
    std::vector<OperatorPoly> q(3);
    q[2] = OperatorPoly::constant(-d * d / (8.0 * g->sigma * g->sigma));
    return exp_series_jet(base, order, q, table);
  }
  if (const auto* g = std::get_if<GeneralMeasureField>(&m.op)) {
    if (order > 2)
      throw Error("jet order unsupported for profile measurements (max 2)");
    const double d = table.delta(g->field, base);
    const auto& prof = g->profile;
    const int steps = std::max(
        4, (int)std::llround(0.004 * prof.width() / prof.dbeta));
    const double e = steps * prof.dbeta;
    auto H = [&](double t) { return h_function(prof, t); };
    const Complex h0 = H(0.0);
    const Complex d1a = (H(e) - H(-e)) / (2.0 * e);
    const Complex d1b = (H(2 * e) - H(-2 * e)) / (4.0 * e);
    const Complex h1 = (4.0 * d1a - d1b) / 3.0;  // Richardson
    const Complex c1a = (H(e) - 2.0 * h0 + H(-e)) / (e * e);
    const Complex c1b = (H(2 * e) - 2.0 * h0 + H(-2 * e)) / (4.0 * e * e);
    const Complex h2 = (4.0 * c1a - c1b) / 3.0;
    WeylJet mj = WeylJet::trivial(base, order);
    mj.c[0] = OperatorPoly::constant(h0);
    if (order >= 1) mj.c[1] = OperatorPoly::constant(h1 * d);
    if (order >= 2) mj.c[2] = OperatorPoly::constant(0.5 * h2 * d * d);
    return mj;
  }
  if (const auto* g = std::get_if<GaussianMeasureCommutingPoly>(&m.op)) {
    const auto cm = shifted_difference(g->poly, base, order, table);
    const double pref = -1.0 / (8.0 * g->sigma * g->sigma);
    std::vector<OperatorPoly> q((size_t)order + 1);
    for (int k = 2; k <= order; ++k) {
      OperatorPoly acc;
      for (int i = 1; i < k; ++i)
        acc += poly_mul(cm[i], cm[k - i], table);
      q[k] = pref * acc;
    }
    return exp_series_jet(base, order, q, table);
  }
  if (const auto* g = std::get_if<GaussianMeasureJordanPair>(&m.op)) {
    if (order > 2)
      throw Error("jet order unsupported for jordan measurements (max 2)");
    const double d12 = table.delta(g->f1, g->f2);
    const double d1 = table.delta(g->f1, base);
    const double d2 = table.delta(g->f2, base);
    const bool z1 = std::fabs(d1) <= ztol, z2 = std::fabs(d2) <= ztol;
    WeylJet mj = WeylJet::trivial(base, order);
    if (z1 && z2) return mj;
    if (!z1 && !z2)
      throw Error(
          "unsupported geometry: jordan measurement with the generator "
          "pairing against both members");
    // roles swap symmetrically; eta depends on r only through r^2
    const LabelId carrier = z2 ? g->f2 : g->f1;
    const double coupling = z2 ? d1 / d12 : d2 / -d12;
    const double r2 = d12 * d12 / (4.0 * g->sigma * g->sigma);
    const Complex eta1 = kI * (std::exp(0.5 * r2) - 1.0);
    const Complex eta2 =
        -(std::exp(2.0 * r2) - 2.0 * std::exp(0.5 * r2) + 1.0);
    const OperatorPoly phi = OperatorPoly::label(carrier);
    if (order >= 1) mj.c[1] = (eta1 * coupling) * phi;
    if (order >= 2)
      mj.c[2] = (0.5 * eta2 * coupling * coupling) * poly_mul(phi, phi, table);
    return mj;
  }
  if (const auto* s = std::get_if<SelectiveGaussian>(&m.op)) {
    if (order > 2)
      throw Error("jet order unsupported for selective measurements (max 2)");
    const double d = table.delta(s->field, base);
    auto D = [&](int n) {
      return OperatorPoly::atom({s->field, n, s->b, s->sigma}) -
             OperatorPoly::atom({s->field, n, s->a, s->sigma});
    };
    WeylJet mj = WeylJet::trivial(base, order);
    mj.c[0] = -0.5 * D(0);
    if (order >= 1) mj.c[1] = (-0.25 * d) * D(1);
    if (order >= 2)
      mj.c[2] = (-d * d / 16.0) * D(2) +
                (d * d / (16.0 * s->sigma * s->sigma)) * D(0);
    return mj;
  }
  const auto& l = std::get<LoccConditional>(m.op);
  if (order > 2)
    throw Error("jet order unsupported for conditional measurements (max 2)");
  const double d1 = table.delta(l.f1, base);
  const double d2 = table.delta(l.f2, base);
  WeylJet mj = WeylJet::trivial(base, order);
  if (order >= 2) {
    const OperatorPoly d0 =
        OperatorPoly::atom({l.f1, 0, l.b, l.sigma}) -
        OperatorPoly::atom({l.f1, 0, l.a, l.sigma});
    mj.c[2] =
        OperatorPoly::constant(-d1 * d1 / (8.0 * l.sigma * l.sigma)) +
        (d2 * d2 / (16.0 * l.sigma * l.sigma)) * d0;
  }
  return mj;
}

}  // namespace

WeylJet apply(const UpdateMap& m, const WeylJet& w, const PairingTable& table) {
  validate_map(m, table);
  if (w.base < 0 || w.base >= table.size())
    throw Error("jet base label is not in the table");
  bool homomorphic = false;
  const WeylJet mult = multiplier_for(m, w, table, homomorphic);
  WeylJet jet = w;
  if (homomorphic) {
    if (const auto* k = std::get_if<KickField>(&m.op)) {
      for (OperatorPoly& c : jet.c)
        c = shift_labels(c, k->field, k->strength, table);
    } else {
      const auto& sq = std::get<KickFieldSquared>(m.op);
      for (OperatorPoly& c : jet.c)
        c = substitute_squared_kick(c, sq.field, table);
    }
  } else {
    require_commuting_coefficients(jet, m.member_labels(), table);
  }
  return jet_multiply(jet, mult, table);
}

Composition compose(std::vector<UpdateMap> maps) {
  if (maps.empty()) throw Error("composition needs at least one map");
  return Composition{std::move(maps)};
}

WeylJet apply_composition(const Composition& c, const WeylJet& w,
                          const PairingTable& table) {
  if (c.maps.empty()) throw Error("composition needs at least one map");
  WeylJet jet = w;
  for (auto it = c.maps.rbegin(); it != c.maps.rend(); ++it)
    jet = apply(*it, jet, table);
  return jet;
}

}  // namespace qfup
