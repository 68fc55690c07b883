#include "qfup/causality.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <set>

#include "qfup/errors.hpp"

namespace qfup {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* verdict_text(SupportVerdict v) {
  switch (v) {
    case SupportVerdict::causal:
      return "causal";
    case SupportVerdict::acausal:
      return "acausal";
    default:
      return "inconclusive";
  }
}

}  // namespace

std::string SupportReport::to_text() const {
  std::string out;
  out += "report = support_audit\n";
  out += "verdict = ";
  out += verdict_text(verdict);
  out += "\n";
  out += "base = " + base_name + "\n";
  out += "tolerance = " + fmt(tolerance) + "\n";
  for (const auto& nl : new_labels) {
    out += "new_label = " + nl.name + " weight " + fmt(nl.weight) + "\n";
  }
  for (const auto& r : new_support_union.rects) {
    out += "union_rect = t " + fmt(r.t_lo) + " " + fmt(r.t_hi) + " x " +
           fmt(r.x_lo) + " " + fmt(r.x_hi) + "\n";
  }
  for (const auto& w : witnesses) {
    out += "witness = t " + fmt(w.t) + " x " + fmt(w.x) + "\n";
  }
  return out;
}

SupportReport psni_check(const WeylJet& result, const RegionSet& g_support,
                         const PairingTable& table, double tolerance) {
  SupportReport rep;
  rep.base = result.base;
  rep.base_name = result.base >= 0 && result.base < table.size()
                      ? table.name(result.base)
                      : std::string("?");
  rep.tolerance = tolerance;

  // largest coefficient magnitude per mentioned label, across all jet
  // coefficient polynomials
  std::set<LabelId> mentioned;
  for (const auto& poly : result.c) {
    for (LabelId id : poly.mentioned_labels()) mentioned.insert(id);
  }
  for (LabelId id : mentioned) {
    if (id < 0 || id >= table.size())
      throw Error("support audit: jet mentions an unregistered label");
    if (id == result.base) continue;
    double w = 0.0;
    for (const auto& poly : result.c) w = std::max(w, poly.label_weight(id));
    if (w > tolerance) rep.new_labels.push_back({id, table.name(id), w});
  }

  if (rep.new_labels.empty()) {
    rep.verdict = SupportVerdict::causal;
    return rep;
  }

  for (const auto& nl : rep.new_labels) {
    RegionSet sup = table.support(nl.label);
    for (const auto& r : sup.rects) {
      rep.new_support_union.rects.push_back(r);
      if (auto esc = shadow_escape_point(r, g_support, ConeDirection::past))
        rep.witnesses.push_back(*esc);
    }
  }
  rep.verdict = rep.witnesses.empty() ? SupportVerdict::inconclusive
                                      : SupportVerdict::acausal;
  return rep;
}

std::string SignalReport::to_text() const {
  std::string out;
  out += "report = signal_scan\n";
  out += "verdict = ";
  out += verdict == SignalVerdict::signal ? "signal" : "no_signal";
  out += "\n";
  if (!protocol_id.empty()) out += "protocol = " + protocol_id + "\n";
  out += "observable = " + observable_text + "\n";
  out += "threshold = " + fmt(threshold) + "\n";
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    out += "coeff_" + std::to_string(i) + " = " + fmt(coeffs[i]) + "\n";
  }
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    out += "sample = lambda " + fmt(lambdas[i]) + " value " +
           fmt(expectations[i]) + "\n";
  }
  return out;
}

SignalReport signal_gradient(const Composition& c, std::size_t alice_index,
                             ObservableKind kind, LabelId observed,
                             const GaussianState& state,
                             std::span<const double> lambda_grid,
                             double threshold) {
  if (state.table == nullptr) throw Error("signal scan: state lacks a table");
  const PairingTable& table = *state.table;
  if (alice_index >= c.maps.size())
    throw Error("signal scan: marked map index out of range");
  if (!std::holds_alternative<KickField>(c.maps[alice_index].op))
    throw Error("signal scan: the marked map must be a field kick");
  if (observed < 0 || observed >= table.size())
    throw Error("signal scan: unregistered observed label");
  if (lambda_grid.empty()) throw Error("signal scan: empty strength grid");

  RegionSet alice = c.maps[alice_index].effective_region(table);
  RegionSet bob = table.support(observed);
  if (region_relation(alice, bob) != RegionRelation::strictly_spacelike)
    throw Error(
        "signal scan: the swept kick's region must be strictly spacelike to "
        "the observed support");

  SignalReport rep;
  rep.observable_text = "phi(" + table.name(observed) + ")" +
                        (kind == ObservableKind::field_squared ? "^2" : "");
  rep.threshold = threshold;
  rep.lambdas.assign(lambda_grid.begin(), lambda_grid.end());
  rep.expectations.assign(lambda_grid.size(), 0.0);

  const int n = (int)lambda_grid.size();
  const int k = kind == ObservableKind::field_squared ? 2 : 1;
  std::exception_ptr first_error;
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      Composition swept = c;
      std::get<KickField>(swept.maps[alice_index].op).strength =
          lambda_grid[i];
      WeylJet jet = apply_composition(
          swept, WeylJet::trivial(observed, std::max(2, k)), table);
      OperatorPoly obs = jet_extract(jet, k, table);
      rep.expectations[i] = wick_expectation(obs, state).real();
    } catch (...) {
#pragma omp critical
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);

  // exact polynomial dependence: least-squares Vandermonde fit, degree
  // capped by the sample count
  const int degree = std::min(2, n - 1);
  Eigen::MatrixXd A(n, degree + 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    double p = 1.0;
    for (int j = 0; j <= degree; ++j, p *= lambda_grid[i]) A(i, j) = p;
    y(i) = rep.expectations[i];
  }
  Eigen::VectorXd sol = A.colPivHouseholderQr().solve(y);
  rep.coeffs.assign(3, 0.0);
  for (int j = 0; j <= degree; ++j) rep.coeffs[(std::size_t)j] = sol(j);

  rep.verdict = (std::abs(rep.coeffs[1]) > threshold ||
                 std::abs(rep.coeffs[2]) > threshold)
                    ? SignalVerdict::signal
                    : SignalVerdict::no_signal;
  return rep;
}

}  // namespace qfup
