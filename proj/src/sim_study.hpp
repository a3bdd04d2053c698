#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "pooling.hpp"
#include "rng.hpp"
#include "shrimp_engine.hpp"

namespace sshrimp::sim {

using data::ClusteredDataset;
using random::RngStream;

// Experiment configuration: banded-covariance clustered Gaussian data, half
// the columns truncated to binary, sequential missing-at-random deletion,
// and a logistic analyst's model on the last variable.
struct SimConfig {
  int m = 10;             // clusters
  int n_base = 100;       // n_i = n_base + Binomial(n_extra, p_extra)
  int n_extra = 20;
  double p_extra = 0.5;
  int d = 10;             // variables; must be even
  double sigma_diag = 5.0;
  double alpha_mis = -3.0;
  double beta_mis = 1.0;
  double p_first = 0.1;   // marginal missing probability of column 1
  int replicates = 100;
  int analyst_iters = 800;
  int analyst_burnin = 300;
  int threads = 1;        // 0 = hardware concurrency
  bool arm_shrimp = true;
  bool arm_cc = true;
};

// The banded covariance: diagonal sigma_diag, -1 at offset 2, 1/2 at offset
// 4, 1 at offset 6. Throws unless symmetric positive definite.
Eigen::MatrixXd banded_sigma(int d, double sigma_diag);

// Complete clustered data: cluster means mu_i ~ N_d(0, I), rows ~
// N_d(mu_i, Sigma); columns above d/2 are truncated to 1{value > 0} (an
// exact zero maps to 1).
ClusteredDataset generate_complete(const SimConfig& cfg, RngStream& rng);

// Sequential MAR deletion: column 1 is masked i.i.d. with p_first; column k
// is masked with logistic(alpha_mis + beta_mis * previous value) when the
// previous column's cell is observed and never when it is missing.
ClusteredDataset impose_mar(const ClusteredDataset& complete,
                            const SimConfig& cfg, RngStream& rng);

// Posterior mean and standard deviation of the analyst's logistic GLMM
// (last variable on intercept + all others, every coefficient forced).
struct FitResult {
  Eigen::VectorXd est;
  Eigen::VectorXd se;
};
FitResult fit_analyst_model(const ClusteredDataset& ds, const SimConfig& cfg,
                            RngStream& rng);

// Rows with any masked cell dropped; clusters left empty are removed.
ClusteredDataset complete_cases(const ClusteredDataset& ds);

struct ReplicateRecord {
  FitResult before_deletion;
  FitResult complete_case;
  std::vector<pooling::PooledEstimate> pooled;  // one per coefficient
  double missing_fraction = 0.0;
};

ReplicateRecord run_replicate(const SimConfig& cfg,
                              const engine::ImputationPlan& plan,
                              const RngStream& rng);

struct MetricsRow {
  std::string coefficient;
  std::string method;  // "shrimp" or "cc"
  double true_value = 0.0;
  pooling::Metrics metrics;
  bool has_fmi = false;
};

struct MonteCarloResult {
  std::vector<MetricsRow> metrics;
  std::vector<ReplicateRecord> records;
  double mean_missing_fraction = 0.0;

  std::string metrics_csv() const;
  std::string records_csv() const;
};

MonteCarloResult run_monte_carlo(const SimConfig& cfg,
                                 const engine::ImputationPlan& plan,
                                 const RngStream& rng);

}  // namespace sshrimp::sim
