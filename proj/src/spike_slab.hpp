#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "dataset.hpp"
#include "rng.hpp"

namespace sshrimp::spikeslab {

using data::Policy;
using random::RngStream;

// Coefficient vector under the spike-and-slab prior together with its slab
// hyperparameters. Invariant: included[k] iff beta[k] != 0, and forced
// coordinates are always included.
struct SpikeSlabState {
  Eigen::VectorXd beta;
  std::vector<std::uint8_t> included;
  double w = 0.5;         // prior inclusion probability, in (0, 1)
  double mu0 = 0.0;       // slab mean
  double sigma0_sq = 1.0; // slab variance

  int dim() const { return static_cast<int>(beta.size()); }
  int included_count() const;
};

// Hyperprior constants: w ~ Beta(a_w, b_w); variance priors are
// sigma_b^2 ~ nu_b * 1 / chi^2_{nu_b} and sigma_e^2 ~ 1 / chi^2_{nu_e}
// (conventions fixed so the conditional numerators below are conjugate).
struct Hyper {
  double a_w = 1.0;
  double b_w = 1.0;
  double nu_b = 1.0;
  double nu_e = 1.0;
};

enum class ScanOrder { Ascending, RandomScan };

struct CoordDraw {
  double beta = 0.0;
  bool included = false;
  double spike_prob = 0.0;  // w1* / (w1* + w2*); 0 for forced coordinates
};

// One spike-and-slab coordinate draw for a conditional of the form
//   p(beta_k | rest) \propto prior(beta_k) * exp(score * beta_k - 0.5 * precision * beta_k^2),
// which covers both samplers: the linear model passes
// precision = sum x^2 / sigma_e^2, score = sum x r / sigma_e^2, and the
// logistic model precision = sum omega x^2, score = sum omega x zeta.
// Spike/slab weights are the two marginal normal densities
//   w1* \propto (1 - w) N(0 | score/precision, 1/precision),
//   w2* \propto w N(mu0 | score/precision, sigma0_sq + 1/precision),
// evaluated in log space. `slab_var_inflation` scales the slab draw variance
// and exists solely as a fault-injection hook for the self-test harness.
CoordDraw draw_spike_slab_coord(double precision, double score, double w,
                                double mu0, double sigma0_sq, Policy policy,
                                double slab_var_inflation, RngStream& rng);

// Conditional updates shared verbatim between the linear and logistic
// samplers. Counting conventions: w counts undetermined coordinates only;
// mu0 and sigma0_sq sum over every included coordinate (forced ones carry
// the slab prior too).
double update_w(const SpikeSlabState& state, std::span<const Policy> policies,
                const Hyper& hyper, RngStream& rng);
double update_mu0(const SpikeSlabState& state, RngStream& rng);
double update_sigma0_sq(const SpikeSlabState& state, RngStream& rng);

// sigma_b^2 | b ~ (nu_b + sum b_i^2) / chi^2_{nu_b + m}.
double update_sigma_b_sq(const Eigen::VectorXd& b, double nu_b, RngStream& rng);

// Initial coefficient state: zero on undetermined coordinates, a slab-prior
// draw on forced ones; w at its prior mean, mu0 = 0, sigma0_sq = 1.
SpikeSlabState make_initial_coef(std::span<const Policy> policies,
                                 const Hyper& hyper, RngStream& rng);

// Coordinate visit order for one cycle.
std::vector<int> scan_indices(int p, ScanOrder order, RngStream& rng);

}  // namespace sshrimp::spikeslab
