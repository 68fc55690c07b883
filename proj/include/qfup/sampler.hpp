#pragma once

#include <cstdint>
#include <vector>

#include "qfup/algebra.hpp"

namespace qfup {

// How simultaneous readouts compose. Pairs with nonzero commutator
// pairing must use the symmetrized convention; fully commuting plans may
// use either.
enum class CompositionConvention { commuting, jordan_symmetrized };

struct MeasurementPlan {
  struct Entry {
    LabelId label = -1;
    double sigma = 1.0;  // readout width, > 0
  };
  std::vector<Entry> entries;
  CompositionConvention convention = CompositionConvention::commuting;
};

// Row-major N x k outcome matrix; reproducible from (seed, N, plan, table).
struct OutcomeBatch {
  int n = 0, k = 0;
  std::uint64_t seed = 0;
  std::vector<double> outcomes;  // alpha values
  std::vector<double> latents;   // pre-noise field values; empty unless kept

  double at(int i, int j) const { return outcomes[(std::size_t)i * k + j]; }
  double latent_at(int i, int j) const {
    return latents[(std::size_t)i * k + j];
  }
};

struct Estimates {
  int n = 0, k = 0;
  std::vector<double> mean, mean_se;
  std::vector<double> second_moment, second_moment_se;
  std::vector<double> covariance;  // k x k, unbiased sample covariance
};

// Draws N outcome vectors: a latent mean-zero Gaussian vector with the
// table's symmetric pairing as covariance, plus independent readout noise
// of the per-entry width. Streams are counter-based and partitioned by
// sample index, so results are bit-identical however the loop is chunked.
// Rejects plans whose latent covariance is not positive semidefinite
// within a 1e-10 relative tolerance.
OutcomeBatch sample_measurements(const MeasurementPlan& plan,
                                 const GaussianState& state, int n,
                                 std::uint64_t seed, bool keep_latents = false,
                                 ExecPolicy exec = ExecPolicy::parallel);

// Unbiased two-pass sample moments; standard errors are sample-std/sqrt(N).
Estimates estimate_moments(const OutcomeBatch& batch);

// For a symmetrized two-entry plan: mean of alpha*beta plus the exact
// antisymmetric correction (i/2) * pairing(g1, g2), estimating the
// two-point function of the state.
Complex recover_correlator(const MeasurementPlan& plan,
                           const GaussianState& state, int n,
                           std::uint64_t seed);

// Mean of alpha + beta against the state expectation of phi(g1) + phi(g2),
// in standard-error units (signed).
double additivity_check(const MeasurementPlan& plan, const GaussianState& state,
                        int n, std::uint64_t seed);

// Counter-based standard normal stream: a pure function of (seed, sample
// index, dimension), exposed for tests.
double counter_normal(std::uint64_t seed, std::uint64_t sample,
                      std::uint64_t dim);

}  // namespace qfup
