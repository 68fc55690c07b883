#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qfup/causality.hpp"
#include "qfup/classical.hpp"
#include "qfup/sampler.hpp"

namespace qfup {

// Observable expression tree; leaves are scalars and named fields, inner
// nodes sums, products, integer powers, and symmetrized pair products.
struct ObservableExpr {
  enum class Kind { scalar, field, sum, product, power, jordan };
  Kind kind = Kind::scalar;
  double value = 0.0;       // scalar
  int sign = 1;             // sum child sign
  std::string name;         // field
  int exponent = 1;         // power
  std::vector<ObservableExpr> kids;
};

ObservableExpr parse_observable(const std::string& text);

// Normal-ordered polynomial of a parsed expression; jordan(a, b) lowers
// to (ab + ba) / 2.
OperatorPoly lower_observable(const ObservableExpr& e,
                              const PairingTable& table);

struct FieldConfig {
  double mass = 1.0;
  QuadratureConfig quad;
  std::string backend = "quadrature";  // or "lattice"
  double lattice_dx = 0.02;
  std::optional<Rect> lattice_window;
};

struct FunctionDef {
  std::string name;
  SmearingFunction fn;
  std::string source_path;  // non-empty when loaded from a sample file
  int line = 0;             // definition site, for duplicate-name diagnostics
};

struct OpSpec {
  int number = 0;
  int line = 0;
  std::string agent;
  std::string map;  // kick, kick_squared, gaussian_measure, general_measure,
                    // commuting_poly_measure, jordan_measure,
                    // selective_gaussian, locc
  std::string field;
  std::vector<std::string> fields;
  bool strength_is_lambda = false;
  bool has_strength = false;
  double strength = 0.0;
  double sigma = 1.0;
  double a = 0.0, b = 0.0;  // readout interval for selective variants
  bool has_interval = false;
  std::string poly;
  std::string profile_path;
  std::vector<Rect> region;
};

struct ReadoutSpec {
  bool present = false;  // a [readout] section appeared in the file
  std::string agent = "bob";
  std::string observable = "phi(g)";
  bool has_sweep = false;
  double sweep_lo = 0.0, sweep_hi = 0.0, sweep_step = 1.0;
  double sigma = 1.0;
  long samples = 0;
  std::uint64_t seed = 1;
  std::vector<std::string> plan_labels;
  std::vector<double> plan_sigmas;
  std::string convention = "commuting";
};

struct MoveSpec {
  bool present = false;
  std::string function;
  double t1 = 0.0, t2 = 0.0;
  std::optional<double> lattice_dx;
  std::optional<Rect> lattice_window;
  std::string out;
};

struct ScatterSpec {
  bool present = false;
  std::string function;
  double kappa = 0.0;
  BumpSpec chi;
  double t1 = 0.0, t2 = 0.0;
  std::optional<double> lattice_dx;
  std::optional<Rect> lattice_window;
  std::string out;
  std::string target;
};

struct ProtocolSpec {
  FieldConfig field;
  std::vector<FunctionDef> functions;
  std::vector<OpSpec> ops;
  ReadoutSpec readout;
  MoveSpec move;
  ScatterSpec scatter;
};

// Section-based plain-text format; see the README for the key catalog.
// Errors carry line and column.
ProtocolSpec parse_protocol(const std::string& text);
ProtocolSpec parse_protocol_file(const std::string& path);

// Canonical text whose re-parse is semantically equal to the input spec.
std::string print_protocol(const ProtocolSpec& spec);

// Pairing table, composition, and lowered observable assembled from a
// spec; the table owns the function registrations, and alice_index points
// at the unique sweep-bound kick when one exists.
struct BuiltProtocol {
  std::unique_ptr<PairingTable> table;
  Composition comp;
  int alice_index = -1;  // index into comp.maps, -1 when no swept kick
  ObservableExpr observable;
  LabelId obs_label = -1;  // single-label observables only
  // observable = obs_c[0] + obs_c[1] phi + obs_c[2] phi^2 when single-label
  double obs_c[3] = {0.0, 0.0, 0.0};
  bool obs_single_label = false;

  GaussianState state() const { return GaussianState{table.get()}; }
};

// Registers functions, builds pairings (quadrature backend also fills
// covariances; the lattice backend pairs on the grid and still takes
// covariances from the momentum integral), resolves operations, and
// validates ordering against the causal relations of the regions.
BuiltProtocol build_protocol(const ProtocolSpec& spec,
                             ExecPolicy exec = ExecPolicy::parallel);

struct RunRow {
  double lambda = 0.0;
  double analytic = 0.0;
  bool has_mc = false;
  double mc_estimate = 0.0;
  double mc_se = 0.0;
};

struct RunResult {
  std::vector<RunRow> rows;
  std::string csv() const;  // header: lambda,analytic,mc_estimate,mc_se
};

// Evaluates the readout expectation under the order-reversed composition
// at each sweep value; a positive sample count adds a Monte Carlo readout
// column with its standard error.
RunResult run_protocol(const ProtocolSpec& spec,
                       const std::optional<std::vector<double>>& sweep_override =
                           std::nullopt,
                       ExecPolicy exec = ExecPolicy::parallel);

struct CheckResult {
  std::vector<SupportReport> op_reports;  // one per operation, state order
  std::vector<SignalReport> signals;      // semantic sweep tests that ran
  SupportVerdict overall = SupportVerdict::causal;
  std::string to_text() const;
};

// Support audit per operation plus, when a sweep-bound kick exists and is
// strictly spacelike to the readout support, a semantic sweep test; the
// semantic test is ground truth where the support audit is inconclusive.
CheckResult check_protocol(const ProtocolSpec& spec,
                           ExecPolicy exec = ExecPolicy::parallel);

// Outcome matrix for the readout plan in the vacuum state; requires an
// operation-free spec. CSV header: sample_index,alpha_1..alpha_k.
std::string sample_protocol_csv(const ProtocolSpec& spec, int n,
                                std::uint64_t seed);

// Function lookup by name; null when absent.
const FunctionDef* find_function(const ProtocolSpec& spec,
                                 const std::string& name);

// Hull of all function supports padded by the light-crossing margin; the
// window used when a spec does not pin one down.
Rect default_lattice_window(const ProtocolSpec& spec, double dx);

}  // namespace qfup
