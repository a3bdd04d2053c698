#include "shrimp_engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <thread>

namespace sshrimp::engine {

namespace {

using data::Policy;
using data::Scale;

struct ColumnStats {
  double mean = 0.0;
  double sd = 1.0;
  bool transformed = false;
};

// Observed-cell mean and standard deviation per continuous column.
std::vector<ColumnStats> standardization_stats(const ClusteredDataset& ds,
                                               bool enabled) {
  std::vector<ColumnStats> stats(static_cast<std::size_t>(ds.n_variables()));
  if (!enabled) return stats;
  for (int k = 0; k < ds.n_variables(); ++k) {
    if (ds.specs()[static_cast<std::size_t>(k)].scale != Scale::Continuous)
      continue;
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < ds.n_rows(); ++r) {
      if (ds.cell_missing(r, k)) continue;
      const double v = ds.value(r, k);
      sum += v;
      sum_sq += v * v;
      ++n;
    }
    if (n < 2) continue;
    const double mean = sum / static_cast<double>(n);
    const double var =
        (sum_sq - static_cast<double>(n) * mean * mean) / (static_cast<double>(n) - 1.0);
    if (var <= 0.0) continue;  // constant column, leave as is
    auto& s = stats[static_cast<std::size_t>(k)];
    s.mean = mean;
    s.sd = std::sqrt(var);
    s.transformed = true;
  }
  return stats;
}

// Clone of the input with unfilled masked cells, optional standardization,
// and the plan's policy override applied. This is the dataset the samplers
// actually work on; outputs are rebuilt from the original.
ClusteredDataset make_working_dataset(const ClusteredDataset& input,
                                      const ImputationPlan& plan,
                                      const std::vector<ColumnStats>& stats) {
  const int d = input.n_variables();
  std::vector<Eigen::MatrixXd> blocks;
  std::vector<std::string> ids;
  std::size_t row0 = 0;
  for (int i = 0; i < input.n_clusters(); ++i) {
    const auto n_i = input.rows_in_cluster(i);
    Eigen::MatrixXd block(static_cast<Eigen::Index>(n_i), d);
    for (std::size_t j = 0; j < n_i; ++j) {
      for (int k = 0; k < d; ++k) {
        const std::size_t r = row0 + j;
        if (input.cell_missing(r, k)) {
          block(static_cast<Eigen::Index>(j), k) =
              std::numeric_limits<double>::quiet_NaN();
        } else {
          double v = input.value(r, k);
          const auto& s = stats[static_cast<std::size_t>(k)];
          if (s.transformed) v = (v - s.mean) / s.sd;
          block(static_cast<Eigen::Index>(j), k) = v;
        }
      }
    }
    blocks.push_back(std::move(block));
    ids.push_back(input.cluster_id(i));
    row0 += n_i;
  }
  auto specs = input.specs();
  if (plan.policy_override) {
    if (plan.policy_override->size() != specs.size())
      throw std::invalid_argument("policy override has wrong length");
    for (std::size_t k = 0; k < specs.size(); ++k)
      specs[k].policy = (*plan.policy_override)[k];
  }
  return ClusteredDataset(std::move(specs), std::move(ids), blocks);
}

std::vector<int> resolve_order(const ClusteredDataset& ds,
                               const ImputationPlan& plan) {
  if (plan.order.empty()) return ds.missing_order();
  if (static_cast<int>(plan.order.size()) != ds.n_variables())
    throw std::invalid_argument("plan order must list every variable once");
  std::vector<std::uint8_t> seen(plan.order.size(), 0);
  for (int k : plan.order) {
    if (k < 0 || k >= ds.n_variables() || seen[static_cast<std::size_t>(k)])
      throw std::invalid_argument("plan order is not a permutation");
    seen[static_cast<std::size_t>(k)] = 1;
  }
  return plan.order;
}

}  // namespace

void initialize_fill(ClusteredDataset& ds, RngStream& rng) {
  const int d = ds.n_variables();
  for (int k = 0; k < d; ++k) {
    const bool binary = ds.specs()[static_cast<std::size_t>(k)].scale == Scale::Binary;
    // Observed values per cluster and pooled.
    std::vector<std::vector<double>> by_cluster(
        static_cast<std::size_t>(ds.n_clusters()));
    std::vector<double> pooled;
    std::size_t row0 = 0;
    for (int i = 0; i < ds.n_clusters(); ++i) {
      for (std::size_t j = 0; j < ds.rows_in_cluster(i); ++j) {
        const std::size_t r = row0 + j;
        if (!ds.cell_missing(r, k)) {
          by_cluster[static_cast<std::size_t>(i)].push_back(ds.value(r, k));
          pooled.push_back(ds.value(r, k));
        }
      }
      row0 += ds.rows_in_cluster(i);
    }
    if (ds.missing_count(k) == 0) continue;
    if (pooled.empty())
      throw std::runtime_error("initialize_fill: variable '" +
                               ds.specs()[static_cast<std::size_t>(k)].name +
                               "' has no observed values");
    double freq = 0.0;
    if (binary) {
      for (double v : pooled) freq += v;
      freq /= static_cast<double>(pooled.size());
    }
    std::vector<double> fills;
    fills.reserve(ds.missing_count(k));
    row0 = 0;
    for (int i = 0; i < ds.n_clusters(); ++i) {
      const auto& local = by_cluster[static_cast<std::size_t>(i)];
      for (std::size_t j = 0; j < ds.rows_in_cluster(i); ++j) {
        const std::size_t r = row0 + j;
        if (!ds.cell_missing(r, k)) continue;
        if (binary) {
          fills.push_back(random::draw_bernoulli(rng, freq));
        } else {
          const auto& source = local.empty() ? pooled : local;
          const auto idx = static_cast<std::size_t>(
              rng.next_u64() % source.size());
          fills.push_back(source[idx]);
        }
      }
      row0 += ds.rows_in_cluster(i);
    }
    ds.write_back(k, fills);
  }
}

void run_cycle(ClusteredDataset& ds, const ImputationPlan& plan,
               const std::vector<int>& order, VariableStates& states,
               RngStream& rng, int copy_index, int cycle_index,
               std::vector<TraceEntry>* traces) {
  if (ds.unfilled_count_total() != 0)
    throw std::invalid_argument("run_cycle: dataset has unfilled cells");
  for (int k : order) {
    const auto view = ds.regression_view(k, plan.include_intercept);
    const auto& spec = ds.specs()[static_cast<std::size_t>(k)];
    TraceEntry entry;
    entry.copy = copy_index;
    entry.cycle = cycle_index;
    entry.variable = k;
    entry.variable_name = spec.name;
    if (spec.scale == Scale::Binary) {
      logit::ChainConfig cfg;
      cfg.scan = plan.scan;
      cfg.record_trace = false;
      auto result = logit::run_chain(view, plan.hyper, cfg,
                                     plan.inner_iterations, rng,
                                     std::move(states.logit[static_cast<std::size_t>(k)]));
      ds.write_back(k, result.imputed);
      entry.model = "logit";
      const auto& st = result.final_state;
      entry.beta.assign(st.coef.beta.data(), st.coef.beta.data() + st.coef.beta.size());
      entry.w = st.coef.w;
      entry.mu0 = st.coef.mu0;
      entry.sigma0_sq = st.coef.sigma0_sq;
      entry.sigma_b_sq = st.sigma_b_sq;
      states.logit[static_cast<std::size_t>(k)] = std::move(result.final_state);
    } else {
      lme::ChainConfig cfg;
      cfg.sigma_e_mode = plan.sigma_e_mode;
      cfg.scan = plan.scan;
      cfg.record_trace = false;
      auto result = lme::run_chain(view, plan.hyper, cfg,
                                   plan.inner_iterations, rng,
                                   std::move(states.lme[static_cast<std::size_t>(k)]));
      ds.write_back(k, result.imputed);
      entry.model = "lme";
      const auto& st = result.final_state;
      entry.beta.assign(st.coef.beta.data(), st.coef.beta.data() + st.coef.beta.size());
      entry.w = st.coef.w;
      entry.mu0 = st.coef.mu0;
      entry.sigma0_sq = st.coef.sigma0_sq;
      entry.sigma_b_sq = st.sigma_b_sq;
      entry.sigma_e_sq = st.sigma_e_sq;
      states.lme[static_cast<std::size_t>(k)] = std::move(result.final_state);
    }
    if (traces) traces->push_back(std::move(entry));
  }
}

ImputationSet multiple_impute(const ClusteredDataset& input,
                              const ImputationPlan& plan,
                              const RngStream& rng) {
  if (plan.copies < 1 || plan.n_cycles < 1 || plan.inner_iterations < 1)
    throw std::invalid_argument("plan counts must all be >= 1");
  const std::vector<int> order = resolve_order(input, plan);
  const auto stats = standardization_stats(input, plan.standardize);
  const int d = input.n_variables();

  struct CopyOutput {
    ClusteredDataset dataset;
    std::vector<TraceEntry> traces;
    double wall_ms = 0.0;
    std::vector<double> cycle_ms;
  };

  auto run_one = [&](int c) -> CopyOutput {
    const auto start = std::chrono::steady_clock::now();
    RngStream copy_rng = rng.child(static_cast<std::uint64_t>(c));
    ClusteredDataset work = make_working_dataset(input, plan, stats);
    initialize_fill(work, copy_rng);
    VariableStates states(d);
    std::vector<TraceEntry> traces;
    std::vector<double> cycle_ms;
    for (int cycle = 0; cycle < plan.n_cycles; ++cycle) {
      const auto cycle_start = std::chrono::steady_clock::now();
      run_cycle(work, plan, order, states, copy_rng, c, cycle, &traces);
      cycle_ms.push_back(std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - cycle_start)
                             .count());
    }
    // Rebuild the output copy from the untouched input so observed cells
    // keep their original bits.
    ClusteredDataset out = input;
    for (int k = 0; k < d; ++k) {
      std::vector<double> values = work.masked_values(k);
      const auto& s = stats[static_cast<std::size_t>(k)];
      if (s.transformed)
        for (double& v : values) v = s.mean + s.sd * v;
      out.write_back(k, values);
    }
    const auto end = std::chrono::steady_clock::now();
    CopyOutput result{std::move(out), std::move(traces),
                      std::chrono::duration<double, std::milli>(end - start).count()};
    return result;
  };

  int threads = plan.threads == 0
                    ? static_cast<int>(std::thread::hardware_concurrency())
                    : plan.threads;
  threads = std::clamp(threads, 1, plan.copies);

  std::vector<std::optional<CopyOutput>> outputs(
      static_cast<std::size_t>(plan.copies));
  if (threads == 1) {
    for (int c = 0; c < plan.copies; ++c) outputs[static_cast<std::size_t>(c)] = run_one(c);
  } else {
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    auto worker = [&](int slot) {
      try {
        for (;;) {
          const int c = next.fetch_add(1);
          if (c >= plan.copies) break;
          outputs[static_cast<std::size_t>(c)] = run_one(c);
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
  }

  ImputationSet set;
  nlohmann::json timing = nlohmann::json::array();
  for (auto& out : outputs) {
    timing.push_back(out->wall_ms);
    for (auto& t : out->traces) set.traces.push_back(std::move(t));
    set.copies.push_back(std::move(out->dataset));
  }

  nlohmann::json manifest;
  manifest["seed"] = rng.seed();
  manifest["rng_path"] = rng.path();
  manifest["copies"] = plan.copies;
  manifest["n_cycles"] = plan.n_cycles;
  manifest["inner_iterations"] = plan.inner_iterations;
  manifest["include_intercept"] = plan.include_intercept;
  manifest["standardize"] = plan.standardize;
  manifest["sigma_e_mode"] = plan.sigma_e_mode == lme::SigmaEMode::Conjugate
                                 ? "conjugate"
                                 : "appendix-literal";
  manifest["scan"] = plan.scan == spikeslab::ScanOrder::Ascending
                         ? "ascending"
                         : "random";
  manifest["hyper"] = {{"a_w", plan.hyper.a_w},
                       {"b_w", plan.hyper.b_w},
                       {"nu_b", plan.hyper.nu_b},
                       {"nu_e", plan.hyper.nu_e}};
  nlohmann::json vars = nlohmann::json::array();
  for (int k = 0; k < d; ++k) {
    const auto& spec = input.specs()[static_cast<std::size_t>(k)];
    vars.push_back(
        {{"name", spec.name},
         {"scale", spec.scale == Scale::Binary ? "binary" : "continuous"},
         {"policy",
          spec.policy == Policy::Forced ? "forced" : "undetermined"},
         {"missing", input.missing_count(k)}});
  }
  manifest["variables"] = vars;
  nlohmann::json order_names = nlohmann::json::array();
  for (int k : order)
    order_names.push_back(input.specs()[static_cast<std::size_t>(k)].name);
  manifest["order"] = order_names;
  manifest["timing_ms_per_copy"] = timing;
  set.manifest_json = manifest.dump(2);
  return set;
}

std::string traces_to_csv(const std::vector<TraceEntry>& traces) {
  std::string out = "copy,cycle,variable,model,param,value\n";
  char buf[64];
  auto emit = [&](const TraceEntry& t, const std::string& param, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += std::to_string(t.copy) + "," + std::to_string(t.cycle) + "," +
           t.variable_name + "," + t.model + "," + param + "," + buf + "\n";
  };
  for (const auto& t : traces) {
    for (std::size_t i = 0; i < t.beta.size(); ++i)
      emit(t, "beta" + std::to_string(i), t.beta[i]);
    emit(t, "w", t.w);
    emit(t, "mu0", t.mu0);
    emit(t, "sigma0_sq", t.sigma0_sq);
    emit(t, "sigma_b_sq", t.sigma_b_sq);
    if (t.model == "lme") emit(t, "sigma_e_sq", t.sigma_e_sq);
  }
  return out;
}

}  // namespace sshrimp::engine
