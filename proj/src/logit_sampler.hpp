#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "dataset.hpp"
#include "rng.hpp"
#include "spike_slab.hpp"

namespace sshrimp::logit {

using data::RegressionView;
using random::RngStream;
using spikeslab::Hyper;
using spikeslab::ScanOrder;
using spikeslab::SpikeSlabState;

// Sampler state for the random-intercept logistic model
//   P(y_ij = 1) = 1 / (1 + exp(-x_ij' beta - b_i)),
// augmented with one Polya-Gamma auxiliary omega_ij per observation so that
// every conditional is Gaussian or conjugate.
struct LogitState {
  SpikeSlabState coef;
  Eigen::VectorXd b;
  double sigma_b_sq = 1.0;
  Eigen::VectorXd omega;  // all entries strictly positive
};

struct ChainConfig {
  ScanOrder scan = ScanOrder::Ascending;
  bool record_trace = true;
  double slab_var_inflation = 1.0;  // self-test fault-injection hook
};

struct ChainResult {
  std::vector<LogitState> trace;
  LogitState final_state;
  Eigen::VectorXd final_y;
  std::vector<double> imputed;
};

LogitState make_initial_state(const RegressionView& view, const Hyper& hyper,
                              RngStream& rng);

class Chain {
 public:
  Chain(const RegressionView& view, const Hyper& hyper,
        const ChainConfig& config, LogitState state);

  // One full cycle: omega, every beta_k, w, mu0, sigma0^2, b, sigma_b^2,
  // then a Bernoulli predictive draw for each masked response.
  void cycle(RngStream& rng);

  const LogitState& state() const { return state_; }
  LogitState& state() { return state_; }
  const Eigen::VectorXd& y() const { return y_; }

  void update_omega(RngStream& rng);
  void update_beta_coord(int k, RngStream& rng);
  void update_random_effects(RngStream& rng);
  void impute_missing_y(RngStream& rng);

  // Spike probability the next update of coordinate k would use.
  double spike_probability(int k) const;

 private:
  void refresh_linpred();
  void refresh_weighted_sums();
  double beta_score(int k) const;

  const RegressionView& view_;
  Hyper hyper_;
  ChainConfig config_;
  LogitState state_;
  Eigen::VectorXd y_;
  Eigen::VectorXd kappa_;    // y - 1/2
  Eigen::VectorXd linpred_;  // X beta, without the random intercept
  Eigen::VectorXd b_of_row_;
  Eigen::VectorXd s_omega_xx_;  // per-column sum of omega x^2
};

ChainResult run_chain(const RegressionView& view, const Hyper& hyper,
                      const ChainConfig& config, int n_cycles, RngStream& rng,
                      std::optional<LogitState> init = std::nullopt);

}  // namespace sshrimp::logit
