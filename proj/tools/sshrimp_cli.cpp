// sshrimp command-line front end. Talks to the engine exclusively through
// the public C API in sshrimp/sshrimp.h.

#include <CLI11.hpp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "sshrimp/sshrimp.h"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

int fail(sshrimp_status status, const std::string& where) {
  const char* kind = "error";
  switch (status) {
    case SSHRIMP_ERR_IO: kind = "i/o error"; break;
    case SSHRIMP_ERR_PARSE: kind = "parse error"; break;
    case SSHRIMP_ERR_INVALID: kind = "invalid input"; break;
    case SSHRIMP_ERR_NUMERIC: kind = "numeric error"; break;
    default: break;
  }
  std::cerr << "sshrimp: " << kind << " (" << where
            << "): " << sshrimp_last_error() << "\n";
  return 1;
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  json j;
  in >> j;
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> copies;
  std::optional<int> cycles;
  std::optional<int> inner_iters;
  std::optional<int> threads;
  std::optional<std::string> sigma_e_mode;
  bool standardize = false;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path,
                  "JSON config file; flags override its fields");
  cmd->add_option("--seed", flags.seed, "RNG seed");
  cmd->add_option("--copies", flags.copies, "number of imputed copies (M)");
  cmd->add_option("--cycles", flags.cycles, "engine cycles over all variables");
  cmd->add_option("--inner-iters", flags.inner_iters,
                  "Gibbs iterations per variable per cycle");
  cmd->add_option("--threads", flags.threads, "worker threads (0 = all cores)");
  cmd->add_option("--sigma-e-mode", flags.sigma_e_mode,
                  "residual-variance update: conjugate | appendix-literal")
      ->check(CLI::IsMember({"conjugate", "appendix-literal"}));
  cmd->add_flag("--standardize", flags.standardize,
                "z-score continuous columns during sampling");
}

json merge_common(const CommonFlags& flags) {
  json j = load_config(flags.config_path);
  if (flags.seed) j["seed"] = *flags.seed;
  if (flags.copies) j["copies"] = *flags.copies;
  if (flags.cycles) j["cycles"] = *flags.cycles;
  if (flags.inner_iters) j["inner_iters"] = *flags.inner_iters;
  if (flags.threads) j["threads"] = *flags.threads;
  if (flags.sigma_e_mode) j["sigma_e_mode"] = *flags.sigma_e_mode;
  if (flags.standardize) j["standardize"] = true;
  return j;
}

int cmd_impute(const CommonFlags& flags, const std::string& input,
               const std::string& output_dir, bool infer_binary,
               const std::string& missing_token,
               const std::string& cluster_column, bool write_traces) {
  json options = merge_common(flags);
  if (infer_binary) options["infer_binary"] = true;
  if (!missing_token.empty()) options["missing_token"] = missing_token;
  if (!cluster_column.empty()) options["cluster_column"] = cluster_column;

  const fs::path out_dir(output_dir);
  std::error_code ec;
  fs::create_directories(out_dir, ec);

  sshrimp_dataset* ds = nullptr;
  auto status = sshrimp_dataset_load_csv(input.c_str(),
                                         options.dump().c_str(), &ds);
  if (status != SSHRIMP_OK) return fail(status, "load " + input);

  sshrimp_imputation* imp = nullptr;
  status = sshrimp_impute(ds, options.dump().c_str(), &imp);
  sshrimp_dataset_free(ds);
  if (status != SSHRIMP_OK) return fail(status, "impute");

  const std::string stem = fs::path(input).stem().string();
  const int copies = sshrimp_imputation_copies(imp);
  for (int c = 0; c < copies; ++c) {
    sshrimp_dataset* copy = nullptr;
    status = sshrimp_imputation_copy(imp, c, &copy);
    if (status != SSHRIMP_OK) {
      sshrimp_imputation_free(imp);
      return fail(status, "extract copy");
    }
    const fs::path path =
        out_dir / (stem + "_imp" + std::to_string(c + 1) + ".csv");
    status = sshrimp_dataset_save_csv(copy, path.string().c_str());
    sshrimp_dataset_free(copy);
    if (status != SSHRIMP_OK) {
      sshrimp_imputation_free(imp);
      return fail(status, "save " + path.string());
    }
    std::cout << "wrote " << path.string() << "\n";
  }

  char* manifest = nullptr;
  status = sshrimp_imputation_manifest(imp, &manifest);
  if (status == SSHRIMP_OK) {
    write_text(out_dir / (stem + "_manifest.json"), manifest);
    std::cout << "wrote " << (out_dir / (stem + "_manifest.json")).string()
              << "\n";
    sshrimp_string_free(manifest);
  }
  if (write_traces) {
    char* csv = nullptr;
    status = sshrimp_imputation_trace_csv(imp, &csv);
    if (status == SSHRIMP_OK) {
      write_text(out_dir / (stem + "_traces.csv"), csv);
      std::cout << "wrote " << (out_dir / (stem + "_traces.csv")).string()
                << "\n";
      sshrimp_string_free(csv);
    }
  }
  sshrimp_imputation_free(imp);
  return status == SSHRIMP_OK ? 0 : fail(status, "write outputs");
}

int cmd_simulate(const CommonFlags& flags, const std::string& output_dir,
                 std::optional<int> replicates, const std::string& arms,
                 bool quick) {
  json options = merge_common(flags);
  if (replicates) options["replicates"] = *replicates;
  if (!arms.empty()) options["arms"] = arms;
  if (quick) {
    // Reduced tier: 10 replicates, M = 5 unless overridden.
    if (!options.contains("replicates")) options["replicates"] = 10;
    if (!options.contains("copies")) options["copies"] = 5;
  }
  if (!options.contains("copies")) options["copies"] = 10;

  const fs::path out_dir(output_dir);
  std::error_code ec;
  fs::create_directories(out_dir, ec);

  sshrimp_table* metrics = nullptr;
  sshrimp_table* records = nullptr;
  const auto status =
      sshrimp_simulate(options.dump().c_str(), &metrics, &records);
  if (status != SSHRIMP_OK) return fail(status, "simulate");

  const fs::path metrics_path = out_dir / "metrics.csv";
  const fs::path records_path = out_dir / "replicates.csv";
  auto st = sshrimp_table_save_csv(metrics, metrics_path.string().c_str());
  if (st == SSHRIMP_OK)
    st = sshrimp_table_save_csv(records, records_path.string().c_str());

  char* text = nullptr;
  if (st == SSHRIMP_OK && sshrimp_table_to_csv(metrics, &text) == SSHRIMP_OK) {
    std::cout << text;
    sshrimp_string_free(text);
    std::cout << "wrote " << metrics_path.string() << "\n"
              << "wrote " << records_path.string() << "\n";
  }
  sshrimp_table_free(metrics);
  sshrimp_table_free(records);
  return st == SSHRIMP_OK ? 0 : fail(st, "write outputs");
}

int cmd_pool(const std::string& input, const std::string& output) {
  sshrimp_table* in = nullptr;
  auto status = sshrimp_table_load_csv(input.c_str(), &in);
  if (status != SSHRIMP_OK) return fail(status, "load " + input);

  sshrimp_table* pooled = nullptr;
  status = sshrimp_pool_table(in, &pooled);
  sshrimp_table_free(in);
  if (status != SSHRIMP_OK) return fail(status, "pool");

  char* text = nullptr;
  status = sshrimp_table_to_csv(pooled, &text);
  if (status == SSHRIMP_OK) {
    std::cout << text;
    sshrimp_string_free(text);
  }
  if (!output.empty()) {
    status = sshrimp_table_save_csv(pooled, output.c_str());
    if (status == SSHRIMP_OK) std::cout << "wrote " << output << "\n";
  }
  sshrimp_table_free(pooled);
  return status == SSHRIMP_OK ? 0 : fail(status, "write output");
}

int cmd_selftest(std::optional<std::uint64_t> seed, bool quick,
                 bool inject_fault) {
  json options;
  if (seed) options["seed"] = *seed;
  options["quick"] = quick;
  options["inject_fault"] = inject_fault;

  char* report = nullptr;
  int failures = 0;
  const auto status =
      sshrimp_selftest(options.dump().c_str(), &report, &failures);
  if (status != SSHRIMP_OK) return fail(status, "selftest");
  std::cout << report;
  sshrimp_string_free(report);
  if (failures != 0) {
    std::cerr << "sshrimp: selftest reported " << failures
              << " failing check(s)\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sshrimp - multiple imputation of clustered data with "
               "spike-and-slab variable selection"};
  app.require_subcommand(1);

  // impute
  auto* impute = app.add_subcommand(
      "impute", "impute a CSV dataset, writing M completed copies");
  CommonFlags impute_flags;
  std::string input;
  std::string output_dir = ".";
  std::string missing_token;
  std::string cluster_column;
  bool infer_binary = false;
  bool write_traces = false;
  impute->add_option("--input", input, "input CSV")->required();
  impute->add_option("--output-dir", output_dir, "output directory");
  impute->add_option("--missing-token", missing_token,
                     "missing-cell token (default NA)");
  impute->add_option("--cluster-column", cluster_column,
                     "cluster-id column (default: first column)");
  impute->add_flag("--infer-binary", infer_binary,
                   "treat {0,1}-valued columns as binary");
  impute->add_flag("--traces", write_traces, "also write chain-trace CSV");
  add_common_flags(impute, impute_flags);

  // simulate
  auto* simulate = app.add_subcommand(
      "simulate", "run the Monte Carlo study and write the metrics table");
  CommonFlags sim_flags;
  std::string sim_output_dir = ".";
  std::optional<int> replicates;
  std::string arms;
  bool quick = false;
  simulate->add_option("--output-dir", sim_output_dir, "output directory");
  simulate->add_option("--replicates", replicates, "Monte Carlo replicates");
  simulate->add_option("--arms", arms, "comma list of study arms: cc,shrimp");
  simulate->add_flag("--quick", quick,
                     "reduced tier (10 replicates, M=5) for smoke runs");
  add_common_flags(simulate, sim_flags);

  // pool
  auto* pool = app.add_subcommand(
      "pool", "Rubin-pool a CSV of (copy, coefficient, estimate, se)");
  std::string pool_input;
  std::string pool_output;
  pool->add_option("--input", pool_input, "input CSV")->required();
  pool->add_option("--output", pool_output, "output CSV (default: stdout only)");

  // selftest
  auto* selftest = app.add_subcommand(
      "selftest", "run the PG sampler suite and both Geweke joint tests");
  std::optional<std::uint64_t> selftest_seed;
  bool selftest_quick = false;
  bool selftest_fault = false;
  selftest->add_option("--seed", selftest_seed, "RNG seed");
  selftest->add_flag("--quick", selftest_quick, "reduced sample sizes");
  selftest->add_flag("--inject-fault", selftest_fault,
                     "perturb a sampler formula; the run must then fail");

  CLI11_PARSE(app, argc, argv);

  try {
    if (impute->parsed())
      return cmd_impute(impute_flags, input, output_dir, infer_binary,
                        missing_token, cluster_column, write_traces);
    if (simulate->parsed())
      return cmd_simulate(sim_flags, sim_output_dir, replicates, arms, quick);
    if (pool->parsed()) return cmd_pool(pool_input, pool_output);
    if (selftest->parsed())
      return cmd_selftest(selftest_seed, selftest_quick, selftest_fault);
  } catch (const std::exception& e) {
    std::cerr << "sshrimp: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
