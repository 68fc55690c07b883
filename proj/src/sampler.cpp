#include "qfup/sampler.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "qfup/errors.hpp"

namespace qfup {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// uniform in (0, 1]: 53 mantissa bits, zero excluded so logs stay finite
double counter_uniform(std::uint64_t seed, std::uint64_t sample,
                       std::uint64_t dim) {
  std::uint64_t h = splitmix(seed ^ 0xD1B54A32D192ED03ull);
  h = splitmix(h ^ splitmix(sample ^ 0x8CB92BA72F3D8DD7ull));
  h = splitmix(h ^ splitmix(dim ^ 0xEB44ACCAB455D165ull));
  return (double)((h >> 11) + 1) * 0x1p-53;
}

void check_plan(const MeasurementPlan& plan, const PairingTable& table) {
  if (plan.entries.empty()) throw Error("sampling: empty plan");
  if (plan.entries.size() > 64)
    throw Error("sampling: plans are limited to 64 entries");
  for (const auto& e : plan.entries) {
    if (e.label < 0 || e.label >= table.size())
      throw Error("sampling: unregistered label in plan");
    if (!(e.sigma > 0.0)) throw Error("sampling: readout width must be > 0");
  }
  if (!table.built() || !table.has_covariance())
    throw Error("sampling: table needs pairings and covariances built");
  if (!(table.mass() > 0.0))
    throw Error("sampling: state covariance requires mass > 0");
  if (plan.convention == CompositionConvention::commuting) {
    const double tol = zero_pairing_tolerance(table);
    for (std::size_t i = 0; i < plan.entries.size(); ++i)
      for (std::size_t j = i + 1; j < plan.entries.size(); ++j)
        if (std::abs(table.delta(plan.entries[i].label,
                                 plan.entries[j].label)) > tol)
          throw Error(
              "sampling: entries with nonzero commutator pairing require the "
              "symmetrized convention");
  }
}

// Factor of the latent covariance: Cholesky when it succeeds, otherwise a
// symmetric eigendecomposition with slightly negative eigenvalues clamped;
// genuinely indefinite matrices are rejected with the offending eigenvalue.
Eigen::MatrixXd latent_factor(const MeasurementPlan& plan,
                              const PairingTable& table) {
  const int k = (int)plan.entries.size();
  Eigen::MatrixXd cov(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      cov(i, j) =
          table.covariance(plan.entries[i].label, plan.entries[j].label);

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success)
    throw Error("sampling: eigendecomposition of the latent covariance failed");
  const double lmax = std::max(es.eigenvalues().maxCoeff(), 0.0);
  const double floor = -1e-10 * std::max(1.0, lmax);
  Eigen::VectorXd lam = es.eigenvalues();
  for (int i = 0; i < k; ++i) {
    if (lam(i) < floor)
      throw Error(
          "sampling: latent covariance is not positive semidefinite "
          "(eigenvalue " +
          std::to_string(lam(i)) + " below tolerance " +
          std::to_string(floor) + ")");
    lam(i) = std::max(lam(i), 0.0);
  }
  return es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
}

}  // namespace

double counter_normal(std::uint64_t seed, std::uint64_t sample,
                      std::uint64_t dim) {
  const double u1 = counter_uniform(seed, sample, 2 * dim);
  const double u2 = counter_uniform(seed, sample, 2 * dim + 1);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

OutcomeBatch sample_measurements(const MeasurementPlan& plan,
                                 const GaussianState& state, int n,
                                 std::uint64_t seed, bool keep_latents,
                                 ExecPolicy exec) {
  if (state.table == nullptr) throw Error("sampling: state lacks a table");
  const PairingTable& table = *state.table;
  check_plan(plan, table);
  if (n < 1) throw Error("sampling: need at least one sample");

  const int k = (int)plan.entries.size();
  Eigen::MatrixXd L = latent_factor(plan, table);

  OutcomeBatch batch;
  batch.n = n;
  batch.k = k;
  batch.seed = seed;
  batch.outcomes.resize((std::size_t)n * k);
  if (keep_latents) batch.latents.resize((std::size_t)n * k);

  // dims 0..k-1 feed the latent vector, dims k..2k-1 the readout noise;
  // every entry is a pure function of (seed, i, dim), so the parallel
  // chunking cannot change the batch
  const bool par = exec == ExecPolicy::parallel;
#pragma omp parallel for schedule(static) if (par)
  for (int i = 0; i < n; ++i) {
    double z[64];
    double v[64];
    for (int d = 0; d < k; ++d)
      z[d] = counter_normal(seed, (std::uint64_t)i, (std::uint64_t)d);
    for (int r = 0; r < k; ++r) {
      double acc = 0.0;
      for (int c2 = 0; c2 <= r; ++c2) acc += L(r, c2) * z[c2];
      // eigen fallback factors are dense; finish the row when needed
      for (int c2 = r + 1; c2 < k; ++c2) acc += L(r, c2) * z[c2];
      v[r] = acc;
    }
    for (int j = 0; j < k; ++j) {
      const double noise =
          plan.entries[j].sigma *
          counter_normal(seed, (std::uint64_t)i, (std::uint64_t)(k + j));
      batch.outcomes[(std::size_t)i * k + j] = v[j] + noise;
      if (keep_latents) batch.latents[(std::size_t)i * k + j] = v[j];
    }
  }
  return batch;
}

Estimates estimate_moments(const OutcomeBatch& batch) {
  if (batch.n < 2) throw Error("estimates: need at least two samples");
  const int n = batch.n, k = batch.k;
  Estimates est;
  est.n = n;
  est.k = k;
  est.mean.assign(k, 0.0);
  est.mean_se.assign(k, 0.0);
  est.second_moment.assign(k, 0.0);
  est.second_moment_se.assign(k, 0.0);
  est.covariance.assign((std::size_t)k * k, 0.0);

  for (int j = 0; j < k; ++j) {
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double a = batch.at(i, j);
      s += a;
      s2 += a * a;
    }
    est.mean[j] = s / n;
    est.second_moment[j] = s2 / n;
  }
  for (int j = 0; j < k; ++j) {
    double var = 0.0, var2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double a = batch.at(i, j);
      const double d = a - est.mean[j];
      const double d2 = a * a - est.second_moment[j];
      var += d * d;
      var2 += d2 * d2;
    }
    var /= n - 1;
    var2 /= n - 1;
    est.mean_se[j] = std::sqrt(var / n);
    est.second_moment_se[j] = std::sqrt(var2 / n);
  }
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i)
        acc += (batch.at(i, a) - est.mean[a]) * (batch.at(i, b) - est.mean[b]);
      est.covariance[(std::size_t)a * k + b] = acc / (n - 1);
    }
  return est;
}

Complex recover_correlator(const MeasurementPlan& plan,
                           const GaussianState& state, int n,
                           std::uint64_t seed) {
  if (plan.entries.size() != 2)
    throw Error("correlator recovery: plan must hold exactly two entries");
  if (plan.convention != CompositionConvention::jordan_symmetrized)
    throw Error("correlator recovery: plan must use the symmetrized convention");
  OutcomeBatch batch = sample_measurements(plan, state, n, seed);
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += batch.at(i, 0) * batch.at(i, 1);
  const double sym = s / n;
  const double anti =
      0.5 * state.table->delta(plan.entries[0].label, plan.entries[1].label);
  return {sym, anti};
}

double additivity_check(const MeasurementPlan& plan, const GaussianState& state,
                        int n, std::uint64_t seed) {
  if (plan.entries.size() != 2)
    throw Error("additivity check: plan must hold exactly two entries");
  OutcomeBatch batch = sample_measurements(plan, state, n, seed);
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = batch.at(i, 0) + batch.at(i, 1);
    s += v;
    s2 += v * v;
  }
  const double mean = s / n;
  const double var = (s2 - n * mean * mean) / (n - 1);
  const double se = std::sqrt(std::max(var, 0.0) / n);

  OperatorPoly sum = OperatorPoly::label(plan.entries[0].label) +
                     OperatorPoly::label(plan.entries[1].label);
  const double target = wick_expectation(sum, state).real();
  if (se == 0.0) return mean == target ? 0.0 : HUGE_VAL;
  return (mean - target) / se;
}

}  // namespace qfup
