#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <set>
#include <vector>

#include "lme_sampler.hpp"
#include "rng.hpp"
#include "shrimp_engine.hpp"
#include "support/oracles.hpp"

using sshrimp::data::ClusteredDataset;
using sshrimp::data::Policy;
using sshrimp::data::Scale;
using sshrimp::data::VariableSpec;
using sshrimp::engine::ImputationPlan;
using sshrimp::random::RngStream;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Two continuous + one binary variable over 3 clusters, correlated enough
// for the imputation models to have signal.
ClusteredDataset make_data(std::uint64_t seed, double missing_rate,
                           int rows_per_cluster = 40) {
  RngStream rng(seed);
  std::vector<VariableSpec> specs{{"u", Scale::Continuous, Policy::Undetermined},
                                  {"v", Scale::Continuous, Policy::Undetermined},
                                  {"flag", Scale::Binary, Policy::Undetermined}};
  std::vector<Eigen::MatrixXd> blocks;
  std::vector<std::string> ids;
  for (int i = 0; i < 3; ++i) {
    Eigen::MatrixXd block(rows_per_cluster, 3);
    const double shift = sshrimp::random::draw_normal(rng, 0.0, 1.0);
    for (int j = 0; j < rows_per_cluster; ++j) {
      const double u = shift + sshrimp::random::draw_normal(rng, 0.0, 1.0);
      const double v = 0.8 * u + sshrimp::random::draw_normal(rng, 0.0, 0.25);
      const double flag = sshrimp::random::draw_bernoulli(
          rng, 1.0 / (1.0 + std::exp(-u)));
      block(j, 0) = rng.uniform() < missing_rate ? kNaN : u;
      block(j, 1) = rng.uniform() < missing_rate ? kNaN : v;
      block(j, 2) = rng.uniform() < missing_rate ? kNaN : flag;
    }
    blocks.push_back(block);
    ids.push_back("c" + std::to_string(i));
  }
  return ClusteredDataset(specs, std::move(ids), blocks);
}

ImputationPlan small_plan(int copies = 2) {
  ImputationPlan plan;
  plan.copies = copies;
  plan.n_cycles = 3;
  plan.inner_iterations = 5;
  return plan;
}

}  // namespace

TEST_SUITE_BEGIN("engine");

TEST_CASE("initialize_fill: hot-deck support and binary frequency") {
  auto ds = make_data(11, 0.25);
  const auto pristine = make_data(11, 0.25);
  RngStream rng(1);
  sshrimp::engine::initialize_fill(ds, rng);
  CHECK(ds.unfilled_count_total() == 0);
  CHECK(ds.observed_cells_equal(pristine));

  // Continuous fills come from the observed values of the same column
  // within the cluster (hot-deck property).
  for (int k = 0; k < 2; ++k) {
    std::size_t row0 = 0;
    for (int i = 0; i < ds.n_clusters(); ++i) {
      std::set<double> observed;
      for (std::size_t j = 0; j < ds.rows_in_cluster(i); ++j)
        if (!ds.cell_missing(row0 + j, k))
          observed.insert(ds.value(row0 + j, k));
      for (std::size_t j = 0; j < ds.rows_in_cluster(i); ++j)
        if (ds.cell_missing(row0 + j, k))
          CHECK(observed.count(ds.value(row0 + j, k)) == 1);
      row0 += ds.rows_in_cluster(i);
    }
  }
  // Binary fills land in {0,1}.
  for (std::size_t r = 0; r < ds.n_rows(); ++r)
    if (ds.cell_missing(r, 2))
      CHECK((ds.value(r, 2) == 0.0 || ds.value(r, 2) == 1.0));
}

TEST_CASE("initialize_fill: fully observed column untouched, frequency-1 case") {
  std::vector<VariableSpec> specs{{"x", Scale::Continuous},
                                  {"b", Scale::Binary}};
  Eigen::MatrixXd block(6, 2);
  for (int j = 0; j < 6; ++j) {
    block(j, 0) = j;
    block(j, 1) = 1.0;  // observed frequency 1
  }
  block(2, 1) = kNaN;
  block(4, 1) = kNaN;
  ClusteredDataset ds(specs, {"c"}, {block});
  RngStream rng(3);
  sshrimp::engine::initialize_fill(ds, rng);
  CHECK(ds.value(2, 1) == 1.0);
  CHECK(ds.value(4, 1) == 1.0);

  // A column with no observed values at all fails.
  Eigen::MatrixXd empty_col(3, 2);
  empty_col.col(0).setConstant(kNaN);
  empty_col.col(1).setOnes();
  ClusteredDataset bad(specs, {"c"}, {empty_col});
  RngStream rng2(4);
  CHECK_THROWS_WITH_AS(sshrimp::engine::initialize_fill(bad, rng2),
                       doctest::Contains("no observed values"),
                       std::runtime_error);
}

TEST_CASE("run_cycle: mask discipline and dispatch records") {
  auto ds = make_data(17, 0.2);
  RngStream rng(5);
  sshrimp::engine::initialize_fill(ds, rng);
  ImputationPlan plan = small_plan();
  sshrimp::engine::VariableStates states(ds.n_variables());
  std::vector<sshrimp::engine::TraceEntry> traces;
  const auto order = ds.missing_order();
  sshrimp::engine::run_cycle(ds, plan, order, states, rng, 0, 0, &traces);

  REQUIRE(traces.size() == 3);
  for (const auto& t : traces) {
    const bool binary = ds.specs()[static_cast<std::size_t>(t.variable)].scale ==
                        Scale::Binary;
    CHECK(t.model == (binary ? "logit" : "lme"));
    CHECK(t.beta.size() == 3);  // intercept + 2 covariates
  }
  CHECK(ds.observed_cells_equal(make_data(17, 0.2)));
}

TEST_CASE("run_cycle: a fully observed variable's cells never change") {
  std::vector<VariableSpec> specs{{"x", Scale::Continuous},
                                  {"y", Scale::Continuous}};
  RngStream data_rng(19);
  Eigen::MatrixXd block(30, 2);
  for (int j = 0; j < 30; ++j) {
    block(j, 0) = sshrimp::random::draw_normal(data_rng, 0.0, 1.0);
    block(j, 1) =
        block(j, 0) + sshrimp::random::draw_normal(data_rng, 0.0, 0.1);
  }
  block(3, 1) = kNaN;
  block(9, 1) = kNaN;
  ClusteredDataset ds(specs, {"c"}, {block});
  RngStream rng(7);
  sshrimp::engine::initialize_fill(ds, rng);
  const Eigen::VectorXd x_before = ds.values().col(0);
  ImputationPlan plan = small_plan();
  sshrimp::engine::VariableStates states(2);
  sshrimp::engine::run_cycle(ds, plan, ds.missing_order(), states, rng, 0, 0,
                             nullptr);
  CHECK(ds.values().col(0) == x_before);
}

TEST_CASE("multiple_impute: copy count, reproducibility, copy diversity") {
  const auto ds = make_data(23, 0.2);
  ImputationPlan plan = small_plan(1);
  RngStream rng(9);
  const auto one = sshrimp::engine::multiple_impute(ds, plan, rng);
  CHECK(one.copies.size() == 1);

  plan.copies = 3;
  const auto a = sshrimp::engine::multiple_impute(ds, plan, rng);
  const auto b = sshrimp::engine::multiple_impute(ds, plan, rng);
  REQUIRE(a.copies.size() == 3);
  for (int c = 0; c < 3; ++c) {
    CHECK(a.copies[static_cast<std::size_t>(c)].unfilled_count_total() == 0);
    CHECK(a.copies[static_cast<std::size_t>(c)].observed_cells_equal(ds));
    // Bit-identical across reruns with the same stream.
    for (int k = 0; k < ds.n_variables(); ++k) {
      const auto va = a.copies[static_cast<std::size_t>(c)].masked_values(k);
      const auto vb = b.copies[static_cast<std::size_t>(c)].masked_values(k);
      CHECK(va == vb);
    }
  }

  // Copies differ somewhere, across several seeds.
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    RngStream r(seed);
    const auto set = sshrimp::engine::multiple_impute(ds, plan, r);
    bool any_diff = false;
    for (int k = 0; k < ds.n_variables(); ++k)
      if (set.copies[0].masked_values(k) != set.copies[1].masked_values(k))
        any_diff = true;
    CHECK(any_diff);
  }
}

TEST_CASE("multiple_impute: threading does not change results") {
  const auto ds = make_data(29, 0.2);
  ImputationPlan plan = small_plan(4);
  plan.threads = 1;
  RngStream rng(13);
  const auto serial = sshrimp::engine::multiple_impute(ds, plan, rng);
  plan.threads = 2;
  const auto parallel = sshrimp::engine::multiple_impute(ds, plan, rng);
  for (int c = 0; c < 4; ++c)
    for (int k = 0; k < ds.n_variables(); ++k)
      CHECK(serial.copies[static_cast<std::size_t>(c)].masked_values(k) ==
            parallel.copies[static_cast<std::size_t>(c)].masked_values(k));
}

TEST_CASE("multiple_impute: zero missing cells is a clean no-op") {
  const auto ds = make_data(31, 0.0);
  REQUIRE(ds.missing_count_total() == 0);
  ImputationPlan plan = small_plan(2);
  RngStream rng(15);
  const auto set = sshrimp::engine::multiple_impute(ds, plan, rng);
  for (const auto& copy : set.copies) {
    CHECK(copy.observed_cells_equal(ds));
    CHECK(copy.missing_count_total() == 0);
  }
  CHECK(set.manifest_json.find("\"copies\": 2") != std::string::npos);
}

TEST_CASE("random-scan and appendix-literal modes run cleanly and seed-stably") {
  const auto ds = make_data(43, 0.2);
  ImputationPlan plan = small_plan(2);
  plan.scan = sshrimp::spikeslab::ScanOrder::RandomScan;
  plan.sigma_e_mode = sshrimp::lme::SigmaEMode::AppendixLiteral;
  RngStream rng(21);
  const auto a = sshrimp::engine::multiple_impute(ds, plan, rng);
  const auto b = sshrimp::engine::multiple_impute(ds, plan, rng);
  for (int c = 0; c < 2; ++c) {
    CHECK(a.copies[static_cast<std::size_t>(c)].observed_cells_equal(ds));
    CHECK(a.copies[static_cast<std::size_t>(c)].unfilled_count_total() == 0);
    for (int k = 0; k < ds.n_variables(); ++k)
      CHECK(a.copies[static_cast<std::size_t>(c)].masked_values(k) ==
            b.copies[static_cast<std::size_t>(c)].masked_values(k));
  }
}

TEST_CASE("standardize mode keeps observed bits and fills sensibly") {
  auto shifted = make_data(37, 0.15);
  ImputationPlan plan = small_plan(2);
  plan.standardize = true;
  RngStream rng(17);
  const auto set = sshrimp::engine::multiple_impute(shifted, plan, rng);
  for (const auto& copy : set.copies) {
    CHECK(copy.observed_cells_equal(shifted));
    CHECK(copy.unfilled_count_total() == 0);
    for (std::size_t r = 0; r < copy.n_rows(); ++r)
      if (copy.cell_missing(r, 2))
        CHECK((copy.value(r, 2) == 0.0 || copy.value(r, 2) == 1.0));
  }
}

TEST_CASE("stationarity smoke test against a long-run oracle chain") {
  // Data simulated exactly from the single-variable linear model; one masked
  // cell. The across-copy mean of that cell must match the posterior mean
  // from one long chain on the same view.
  RngStream data_rng(41);
  const int m = 3;
  const int n_i = 30;
  std::vector<VariableSpec> specs{{"x", Scale::Continuous, Policy::Forced},
                                  {"y", Scale::Continuous, Policy::Forced}};
  std::vector<Eigen::MatrixXd> blocks;
  std::vector<std::string> ids;
  for (int i = 0; i < m; ++i) {
    const double b_i = sshrimp::random::draw_normal(data_rng, 0.0, 0.25);
    Eigen::MatrixXd block(n_i, 2);
    for (int j = 0; j < n_i; ++j) {
      block(j, 0) = sshrimp::random::draw_normal(data_rng, 0.0, 1.0);
      block(j, 1) = 2.0 * block(j, 0) + b_i +
                    sshrimp::random::draw_normal(data_rng, 0.0, 0.25);
    }
    blocks.push_back(block);
    ids.push_back("c" + std::to_string(i));
  }
  blocks[0](5, 1) = kNaN;  // the single masked cell
  const ClusteredDataset ds(specs, std::move(ids), blocks);

  ImputationPlan plan;
  plan.copies = 300;
  plan.n_cycles = 6;
  plan.inner_iterations = 10;
  plan.threads = 2;
  RngStream rng(19);
  const auto set = sshrimp::engine::multiple_impute(ds, plan, rng);
  std::vector<double> copy_draws;
  for (const auto& copy : set.copies)
    copy_draws.push_back(copy.value(5, 1));

  // Long-run oracle: one chain, 1e5 cycles, tracking the imputed cell.
  auto filled = ds;
  RngStream fill_rng(21);
  sshrimp::engine::initialize_fill(filled, fill_rng);
  const auto view = filled.regression_view(1, true);
  sshrimp::lme::ChainConfig config;
  config.record_trace = false;
  sshrimp::spikeslab::Hyper hyper;
  RngStream oracle_rng(23);
  sshrimp::lme::Chain chain(
      view, hyper, config,
      sshrimp::lme::make_initial_state(view, hyper, oracle_rng));
  std::vector<double> oracle_draws;
  Eigen::Index masked_row = -1;
  for (Eigen::Index r = 0; r < view.rows(); ++r)
    if (view.y_missing[static_cast<std::size_t>(r)]) masked_row = r;
  REQUIRE(masked_row >= 0);
  for (int c = 0; c < 100000; ++c) {
    chain.cycle(oracle_rng);
    if (c >= 1000) oracle_draws.push_back(chain.y()(masked_row));
  }

  const double se = std::sqrt(
      std::pow(oracles::se_of_mean(copy_draws), 2) +
      std::pow(10.0 * oracles::se_of_mean(oracle_draws), 2));
  CHECK(std::fabs(oracles::mean(copy_draws) - oracles::mean(oracle_draws)) <
        4.0 * se);
}

TEST_SUITE_END();
