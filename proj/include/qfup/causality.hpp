#pragma once

#include <span>
#include <string>
#include <vector>

#include "qfup/maps.hpp"

namespace qfup {

enum class SupportVerdict { causal, acausal, inconclusive };

// A label that shows up in a transformed jet without being the observed
// one, together with how strongly it enters.
struct NewLabel {
  LabelId label = -1;
  std::string name;
  double weight = 0.0;  // largest |coefficient| mentioning the label
};

struct SupportReport {
  LabelId base = -1;
  std::string base_name;
  std::vector<NewLabel> new_labels;
  RegionSet new_support_union;
  SupportVerdict verdict = SupportVerdict::causal;
  // points inside some new label's support, strictly outside the causal
  // past of the observed support; empty unless acausal
  std::vector<Point> witnesses;
  double tolerance = 0.0;

  std::string to_text() const;
};

// Support audit of a transformed jet: acausal when a label other than the
// base enters some coefficient with weight above tolerance and its support
// reaches outside the causal past of g_support (witness points reported);
// causal when no other label enters; inconclusive when growth stays inside
// the past (a support check alone cannot certify that case).  The default
// tolerance 0 makes membership structural: exact zeros are pruned by the
// algebra, so any stored coefficient counts no matter how small the pairing
// values are.  Pass a positive tolerance only when upstream roundoff can
// leave near-zero residue in the coefficients.
SupportReport psni_check(const WeylJet& result, const RegionSet& g_support,
                         const PairingTable& table, double tolerance = 0.0);

enum class ObservableKind { field, field_squared };

enum class SignalVerdict { no_signal, signal };

struct SignalReport {
  std::string protocol_id;
  std::string observable_text;
  std::vector<double> lambdas;
  std::vector<double> expectations;
  std::vector<double> coeffs;  // constant, linear, quadratic
  SignalVerdict verdict = SignalVerdict::no_signal;
  double threshold = 0.0;

  std::string to_text() const;
};

// Sweeps the strength of the map at alice_index (which must be a field
// kick in a region strictly spacelike to the observed label's support),
// evaluates the observable's expectation after the composition at each
// grid value, and fits the exact polynomial dependence (degree <= 2).
// Any non-constant fitted coefficient above threshold flags a signal.
SignalReport signal_gradient(const Composition& c, std::size_t alice_index,
                             ObservableKind kind, LabelId observed,
                             const GaussianState& state,
                             std::span<const double> lambda_grid,
                             double threshold = 1e-10);

}  // namespace qfup
