#include "sim_study.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

#include "logit_sampler.hpp"
#include "mathutil.hpp"

namespace sshrimp::sim {

namespace {

using data::Policy;
using data::Scale;
using data::VariableSpec;

void check_config(const SimConfig& cfg) {
  if (cfg.d < 2 || cfg.d % 2 != 0)
    throw std::invalid_argument("sim: d must be even and >= 2");
  if (cfg.m < 1) throw std::invalid_argument("sim: m must be >= 1");
  if (cfg.p_first < 0.0 || cfg.p_first > 1.0)
    throw std::invalid_argument("sim: p_first must lie in [0, 1]");
  if (cfg.analyst_iters <= cfg.analyst_burnin)
    throw std::invalid_argument("sim: analyst_iters must exceed burn-in");
}

std::vector<VariableSpec> make_specs(int d) {
  std::vector<VariableSpec> specs;
  for (int k = 0; k < d; ++k) {
    VariableSpec s;
    s.name = "v" + std::to_string(k + 1);
    s.scale = k < d / 2 ? Scale::Continuous : Scale::Binary;
    s.policy = Policy::Undetermined;
    specs.push_back(std::move(s));
  }
  return specs;
}

}  // namespace

Eigen::MatrixXd banded_sigma(int d, double sigma_diag) {
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(d, d);
  for (int k = 0; k < d; ++k) sigma(k, k) = sigma_diag;
  const std::pair<int, double> bands[] = {{2, -1.0}, {4, 0.5}, {6, 1.0}};
  for (const auto& [offset, value] : bands) {
    for (int k = 0; k + offset < d; ++k) {
      sigma(k, k + offset) = value;
      sigma(k + offset, k) = value;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
  if (eig.eigenvalues().minCoeff() <= 0.0)
    throw std::runtime_error("banded covariance is not positive definite");
  return sigma;
}

ClusteredDataset generate_complete(const SimConfig& cfg, RngStream& rng) {
  check_config(cfg);
  const int d = cfg.d;
  const Eigen::MatrixXd sigma = banded_sigma(d, cfg.sigma_diag);
  const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(sigma).matrixL();

  std::vector<Eigen::MatrixXd> blocks;
  std::vector<std::string> ids;
  for (int i = 0; i < cfg.m; ++i) {
    const int n_i = cfg.n_base + random::draw_binomial(rng, cfg.n_extra, cfg.p_extra);
    Eigen::VectorXd mu(d);
    for (int k = 0; k < d; ++k) mu(k) = random::draw_std_normal(rng);
    Eigen::MatrixXd block(n_i, d);
    Eigen::VectorXd z(d);
    for (int j = 0; j < n_i; ++j) {
      for (int k = 0; k < d; ++k) z(k) = random::draw_std_normal(rng);
      block.row(j) = (mu + chol * z).transpose();
    }
    // Truncate the upper half of the columns to binary.
    for (int k = d / 2; k < d; ++k)
      for (int j = 0; j < n_i; ++j)
        block(j, k) = block(j, k) >= 0.0 ? 1.0 : 0.0;
    blocks.push_back(std::move(block));
    ids.push_back("c" + std::to_string(i + 1));
  }
  return ClusteredDataset(make_specs(d), std::move(ids), blocks);
}

ClusteredDataset impose_mar(const ClusteredDataset& complete,
                            const SimConfig& cfg, RngStream& rng) {
  if (complete.missing_count_total() != 0)
    throw std::invalid_argument("impose_mar: dataset already has missing cells");
  const int d = complete.n_variables();
  const auto nan = std::numeric_limits<double>::quiet_NaN();

  std::vector<Eigen::MatrixXd> blocks;
  std::vector<std::string> ids;
  std::size_t row0 = 0;
  for (int i = 0; i < complete.n_clusters(); ++i) {
    const auto n_i = complete.rows_in_cluster(i);
    Eigen::MatrixXd block(static_cast<Eigen::Index>(n_i), d);
    for (std::size_t j = 0; j < n_i; ++j)
      for (int k = 0; k < d; ++k)
        block(static_cast<Eigen::Index>(j), k) = complete.value(row0 + j, k);
    for (std::size_t j = 0; j < n_i; ++j) {
      if (random::draw_bernoulli(rng, cfg.p_first))
        block(static_cast<Eigen::Index>(j), 0) = nan;
      for (int k = 1; k < d; ++k) {
        const double prev = block(static_cast<Eigen::Index>(j), k - 1);
        // The mechanism reads only the previous column: a missing neighbour
        // protects the cell, an observed one feeds the logistic propensity.
        if (std::isnan(prev)) continue;
        const double p = sigmoid(cfg.alpha_mis + cfg.beta_mis * prev);
        if (random::draw_bernoulli(rng, p))
          block(static_cast<Eigen::Index>(j), k) = nan;
      }
    }
    blocks.push_back(std::move(block));
    ids.push_back(complete.cluster_id(i));
    row0 += n_i;
  }
  return ClusteredDataset(complete.specs(), std::move(ids), blocks);
}

FitResult fit_analyst_model(const ClusteredDataset& ds, const SimConfig& cfg,
                            RngStream& rng) {
  const int target = ds.n_variables() - 1;
  auto view = ds.regression_view(target, true);
  std::fill(view.policies.begin(), view.policies.end(), Policy::Forced);
  // The analyst treats a completed copy as fixed data: imputed responses are
  // conditioned on, not redrawn.
  for (Eigen::Index r = 0; r < view.y.size(); ++r)
    if (std::isnan(view.y(r)))
      throw std::invalid_argument("analyst fit requires a completed dataset");
  std::fill(view.y_missing.begin(), view.y_missing.end(), 0);

  logit::ChainConfig chain_cfg;
  chain_cfg.record_trace = true;
  spikeslab::Hyper hyper;
  const auto result = logit::run_chain(view, hyper, chain_cfg,
                                       cfg.analyst_iters, rng);

  const int p = static_cast<int>(view.cols());
  const int kept = cfg.analyst_iters - cfg.analyst_burnin;
  FitResult fit;
  fit.est = Eigen::VectorXd::Zero(p);
  fit.se = Eigen::VectorXd::Zero(p);
  for (int it = cfg.analyst_burnin; it < cfg.analyst_iters; ++it)
    fit.est += result.trace[static_cast<std::size_t>(it)].coef.beta;
  fit.est /= kept;
  for (int it = cfg.analyst_burnin; it < cfg.analyst_iters; ++it) {
    const Eigen::VectorXd dev =
        result.trace[static_cast<std::size_t>(it)].coef.beta - fit.est;
    fit.se += dev.cwiseProduct(dev);
  }
  fit.se = (fit.se / (kept - 1)).cwiseSqrt();
  return fit;
}

ClusteredDataset complete_cases(const ClusteredDataset& ds) {
  const int d = ds.n_variables();
  std::vector<Eigen::MatrixXd> blocks;
  std::vector<std::string> ids;
  std::size_t row0 = 0;
  for (int i = 0; i < ds.n_clusters(); ++i) {
    const auto n_i = ds.rows_in_cluster(i);
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < n_i; ++j) {
      bool complete = true;
      for (int k = 0; k < d; ++k)
        if (ds.cell_missing(row0 + j, k)) complete = false;
      if (complete) keep.push_back(row0 + j);
    }
    if (!keep.empty()) {
      Eigen::MatrixXd block(static_cast<Eigen::Index>(keep.size()), d);
      for (std::size_t j = 0; j < keep.size(); ++j)
        for (int k = 0; k < d; ++k)
          block(static_cast<Eigen::Index>(j), k) = ds.value(keep[j], k);
      blocks.push_back(std::move(block));
      ids.push_back(ds.cluster_id(i));
    }
    row0 += n_i;
  }
  if (blocks.empty())
    throw std::runtime_error("complete-case analysis: no complete rows");
  return ClusteredDataset(ds.specs(), std::move(ids), blocks);
}

ReplicateRecord run_replicate(const SimConfig& cfg,
                              const engine::ImputationPlan& plan,
                              const RngStream& rng) {
  check_config(cfg);
  RngStream gen_rng = rng.child(1);
  const ClusteredDataset complete = generate_complete(cfg, gen_rng);

  RngStream bd_rng = rng.child(2);
  ReplicateRecord record;
  record.before_deletion = fit_analyst_model(complete, cfg, bd_rng);

  RngStream mar_rng = rng.child(3);
  const ClusteredDataset masked = impose_mar(complete, cfg, mar_rng);
  record.missing_fraction =
      static_cast<double>(masked.missing_count_total()) /
      (static_cast<double>(masked.n_rows()) * masked.n_variables());

  const auto imputed = engine::multiple_impute(masked, plan, rng.child(4));

  const int p = cfg.d;  // intercept + d - 1 covariates
  std::vector<std::vector<double>> est(static_cast<std::size_t>(p));
  std::vector<std::vector<double>> se(static_cast<std::size_t>(p));
  const RngStream fit_rng = rng.child(5);
  for (int c = 0; c < plan.copies; ++c) {
    RngStream copy_rng = fit_rng.child(static_cast<std::uint64_t>(c));
    const FitResult fit =
        fit_analyst_model(imputed.copies[static_cast<std::size_t>(c)], cfg,
                          copy_rng);
    for (int j = 0; j < p; ++j) {
      est[static_cast<std::size_t>(j)].push_back(fit.est(j));
      se[static_cast<std::size_t>(j)].push_back(fit.se(j));
    }
  }
  for (int j = 0; j < p; ++j)
    record.pooled.push_back(pooling::rubin_pool(est[static_cast<std::size_t>(j)],
                                                se[static_cast<std::size_t>(j)]));

  RngStream cc_rng = rng.child(6);
  record.complete_case = fit_analyst_model(complete_cases(masked), cfg, cc_rng);
  return record;
}

namespace {

// Single-fit interval treated as a degenerate pooled estimate so both study
// arms flow through the same metric computation. FMI is not meaningful here.
pooling::PooledEstimate single_fit_estimate(double est, double se) {
  pooling::PooledEstimate p;
  p.q_bar = est;
  p.u_bar = se * se;
  p.b_between = 0.0;
  p.t_total = se * se;
  p.df = std::numeric_limits<double>::infinity();
  const double half = 1.959963984540054 * se;
  p.ci_low = est - half;
  p.ci_high = est + half;
  p.fmi = 0.0;
  return p;
}

void append_csv_value(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.8g", v);
  out += buf;
}

}  // namespace

MonteCarloResult run_monte_carlo(const SimConfig& cfg,
                                 const engine::ImputationPlan& plan,
                                 const RngStream& rng) {
  check_config(cfg);
  if (cfg.replicates < 2)
    throw std::invalid_argument("run_monte_carlo: need >= 2 replicates");

  MonteCarloResult result;
  result.records.resize(static_cast<std::size_t>(cfg.replicates));

  int threads = cfg.threads == 0
                    ? static_cast<int>(std::thread::hardware_concurrency())
                    : cfg.threads;
  threads = std::clamp(threads, 1, cfg.replicates);
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  auto worker = [&](int slot) {
    try {
      for (;;) {
        const int r = next.fetch_add(1);
        if (r >= cfg.replicates) break;
        result.records[static_cast<std::size_t>(r)] =
            run_replicate(cfg, plan, rng.child(static_cast<std::uint64_t>(r)));
      }
    } catch (...) {
      errors[static_cast<std::size_t>(slot)] = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker, t);
  worker(0);
  for (auto& th : pool) th.join();
  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);

  const int p = cfg.d;
  double missing_sum = 0.0;
  for (const auto& rec : result.records) missing_sum += rec.missing_fraction;
  result.mean_missing_fraction = missing_sum / cfg.replicates;

  for (int j = 0; j < p; ++j) {
    double truth = 0.0;
    for (const auto& rec : result.records) truth += rec.before_deletion.est(j);
    truth /= cfg.replicates;

    const std::string name = "beta" + std::to_string(j);
    if (cfg.arm_cc) {
      std::vector<pooling::PooledEstimate> cc;
      for (const auto& rec : result.records)
        cc.push_back(single_fit_estimate(rec.complete_case.est(j),
                                         rec.complete_case.se(j)));
      MetricsRow row;
      row.coefficient = name;
      row.method = "cc";
      row.true_value = truth;
      row.metrics = pooling::compute_metrics(truth, cc);
      row.has_fmi = false;
      result.metrics.push_back(std::move(row));
    }
    if (cfg.arm_shrimp) {
      std::vector<pooling::PooledEstimate> pooled;
      for (const auto& rec : result.records)
        pooled.push_back(rec.pooled[static_cast<std::size_t>(j)]);
      MetricsRow row;
      row.coefficient = name;
      row.method = "shrimp";
      row.true_value = truth;
      row.metrics = pooling::compute_metrics(truth, pooled);
      row.has_fmi = true;
      result.metrics.push_back(std::move(row));
    }
  }
  return result;
}

std::string MonteCarloResult::metrics_csv() const {
  std::string out = "coefficient,method,true_value,PB,RMSE,SE,CR,FMI\n";
  for (const auto& row : metrics) {
    out += row.coefficient + "," + row.method + ",";
    append_csv_value(out, row.true_value);
    out += ",";
    append_csv_value(out, row.metrics.pb);
    out += ",";
    append_csv_value(out, row.metrics.rmse);
    out += ",";
    append_csv_value(out, row.metrics.se);
    out += ",";
    append_csv_value(out, row.metrics.cr);
    out += ",";
    if (row.has_fmi) append_csv_value(out, row.metrics.fmi);
    out += "\n";
  }
  return out;
}

std::string MonteCarloResult::records_csv() const {
  std::string out =
      "replicate,coefficient,bd_est,bd_se,cc_est,cc_se,pooled_est,pooled_se,"
      "ci_low,ci_high,fmi,df,missing_fraction\n";
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    for (Eigen::Index j = 0; j < rec.before_deletion.est.size(); ++j) {
      const auto& pooled = rec.pooled[static_cast<std::size_t>(j)];
      out += std::to_string(r) + ",beta" + std::to_string(j) + ",";
      append_csv_value(out, rec.before_deletion.est(j));
      out += ",";
      append_csv_value(out, rec.before_deletion.se(j));
      out += ",";
      append_csv_value(out, rec.complete_case.est(j));
      out += ",";
      append_csv_value(out, rec.complete_case.se(j));
      out += ",";
      append_csv_value(out, pooled.q_bar);
      out += ",";
      append_csv_value(out, std::sqrt(pooled.t_total));
      out += ",";
      append_csv_value(out, pooled.ci_low);
      out += ",";
      append_csv_value(out, pooled.ci_high);
      out += ",";
      append_csv_value(out, pooled.fmi);
      out += ",";
      append_csv_value(out, pooled.df);
      out += ",";
      append_csv_value(out, rec.missing_fraction);
      out += "\n";
    }
  }
  return out;
}

}  // namespace sshrimp::sim
