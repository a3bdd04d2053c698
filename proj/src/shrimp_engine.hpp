#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "lme_sampler.hpp"
#include "logit_sampler.hpp"
#include "rng.hpp"
#include "spike_slab.hpp"

namespace sshrimp::engine {

using data::ClusteredDataset;
using random::RngStream;

// Settings for one multiple-imputation run: the variable visit order, cycle
// counts, number of copies, and per-variable selection policies for
// covariate roles.
struct ImputationPlan {
  std::vector<int> order;    // empty = sort by ascending missing count
  int n_cycles = 10;         // engine cycles over all variables
  int inner_iterations = 20; // Gibbs iterations per variable per cycle
  int copies = 5;            // M
  bool include_intercept = true;
  spikeslab::Hyper hyper;
  lme::SigmaEMode sigma_e_mode = lme::SigmaEMode::Conjugate;
  spikeslab::ScanOrder scan = spikeslab::ScanOrder::Ascending;
  bool standardize = false;  // z-score continuous columns during sampling
  int threads = 1;           // 0 = hardware concurrency, capped by copies
  std::optional<std::vector<data::Policy>> policy_override;
};

// Per-variable sampler snapshot taken after each engine cycle.
struct TraceEntry {
  int copy = 0;
  int cycle = 0;
  int variable = 0;
  std::string variable_name;
  std::string model;  // "lme" or "logit"
  std::vector<double> beta;
  double w = 0.0;
  double mu0 = 0.0;
  double sigma0_sq = 0.0;
  double sigma_b_sq = 0.0;
  double sigma_e_sq = 0.0;  // 0 for logistic targets
};

struct ImputationSet {
  std::vector<ClusteredDataset> copies;
  std::vector<TraceEntry> traces;
  std::string manifest_json;
};

// Cycle-0 bootstrap: masked continuous cells get a hot-deck draw from the
// observed values of their column within the same cluster (whole column when
// the cluster has none); masked binary cells get a Bernoulli draw at the
// column's observed frequency. Fails on a column with no observed values.
void initialize_fill(ClusteredDataset& ds, RngStream& rng);

// Warm-started sampler states carried across engine cycles.
struct VariableStates {
  std::vector<std::optional<lme::LmeState>> lme;
  std::vector<std::optional<logit::LogitState>> logit;

  explicit VariableStates(int d) : lme(d), logit(d) {}
};

// One SHRIMP cycle: for each variable in plan order, regress it on all
// others at their current values, run the matching Gibbs sampler for
// inner_iterations cycles, and write the final imputations back.
void run_cycle(ClusteredDataset& ds, const ImputationPlan& plan,
               const std::vector<int>& order, VariableStates& states,
               RngStream& rng, int copy_index, int cycle_index,
               std::vector<TraceEntry>* traces);

// M independent SHRIMP runs on distinct substreams of `rng`; each copy is an
// initial fill followed by n_cycles run_cycle passes.
ImputationSet multiple_impute(const ClusteredDataset& ds,
                              const ImputationPlan& plan,
                              const RngStream& rng);

std::string traces_to_csv(const std::vector<TraceEntry>& traces);

}  // namespace sshrimp::engine
