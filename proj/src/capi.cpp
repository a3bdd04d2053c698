#include "sshrimp/sshrimp.h"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "dataset.hpp"
#include "pooling.hpp"
#include "selftest.hpp"
#include "shrimp_engine.hpp"
#include "sim_study.hpp"

namespace {

using nlohmann::json;

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

sshrimp_status classify(const std::exception& e) {
  const std::string what = e.what();
  if (dynamic_cast<const json::exception*>(&e)) return SSHRIMP_ERR_PARSE;
  if (dynamic_cast<const std::invalid_argument*>(&e)) return SSHRIMP_ERR_INVALID;
  if (what.find("cannot open") != std::string::npos ||
      what.find("write to") != std::string::npos)
    return SSHRIMP_ERR_IO;
  if (what.find("line ") == 0 || what.find("CSV") != std::string::npos ||
      what.find("header") != std::string::npos)
    return SSHRIMP_ERR_PARSE;
  if (what.find("non-finite") != std::string::npos ||
      what.find("degenerate") != std::string::npos)
    return SSHRIMP_ERR_NUMERIC;
  return SSHRIMP_ERR_INVALID;
}

template <typename Fn>
sshrimp_status guarded(Fn&& fn) {
  try {
    fn();
    return SSHRIMP_OK;
  } catch (const std::exception& e) {
    set_error(e.what());
    return classify(e);
  } catch (...) {
    set_error("unknown error");
    return SSHRIMP_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

sshrimp::data::CsvOptions parse_csv_options(const json& j) {
  sshrimp::data::CsvOptions opt;
  opt.missing_token = j.value("missing_token", std::string("NA"));
  opt.cluster_column = j.value("cluster_column", std::string());
  opt.infer_binary = j.value("infer_binary", false);
  return opt;
}

std::vector<sshrimp::data::VariableSpec> parse_variable_specs(const json& j) {
  std::vector<sshrimp::data::VariableSpec> specs;
  if (!j.contains("variables")) return specs;
  for (const auto& v : j.at("variables")) {
    sshrimp::data::VariableSpec spec;
    spec.name = v.at("name").get<std::string>();
    const std::string scale = v.value("scale", std::string("continuous"));
    if (scale == "binary")
      spec.scale = sshrimp::data::Scale::Binary;
    else if (scale == "continuous")
      spec.scale = sshrimp::data::Scale::Continuous;
    else
      throw std::invalid_argument("unknown scale '" + scale + "'");
    const std::string policy = v.value("policy", std::string("undetermined"));
    if (policy == "forced")
      spec.policy = sshrimp::data::Policy::Forced;
    else if (policy == "undetermined")
      spec.policy = sshrimp::data::Policy::Undetermined;
    else
      throw std::invalid_argument("unknown policy '" + policy + "'");
    specs.push_back(std::move(spec));
  }
  return specs;
}

json parse_options(const char* options_json) {
  if (options_json == nullptr || options_json[0] == '\0')
    return json::object();
  return json::parse(options_json);
}

sshrimp::engine::ImputationPlan parse_plan(const json& j) {
  sshrimp::engine::ImputationPlan plan;
  plan.copies = j.value("copies", 5);
  plan.n_cycles = j.value("cycles", 10);
  plan.inner_iterations = j.value("inner_iters", 20);
  plan.include_intercept = j.value("include_intercept", true);
  plan.standardize = j.value("standardize", false);
  plan.threads = j.value("threads", 0);  // 0 = available cores
  const std::string mode = j.value("sigma_e_mode", std::string("conjugate"));
  if (mode == "appendix-literal")
    plan.sigma_e_mode = sshrimp::lme::SigmaEMode::AppendixLiteral;
  else if (mode == "conjugate")
    plan.sigma_e_mode = sshrimp::lme::SigmaEMode::Conjugate;
  else
    throw std::invalid_argument("unknown sigma_e_mode '" + mode + "'");
  const std::string scan = j.value("scan", std::string("ascending"));
  if (scan == "random")
    plan.scan = sshrimp::spikeslab::ScanOrder::RandomScan;
  else if (scan == "ascending")
    plan.scan = sshrimp::spikeslab::ScanOrder::Ascending;
  else
    throw std::invalid_argument("unknown scan '" + scan + "'");
  if (j.contains("hyper")) {
    const auto& h = j.at("hyper");
    plan.hyper.a_w = h.value("a_w", 1.0);
    plan.hyper.b_w = h.value("b_w", 1.0);
    plan.hyper.nu_b = h.value("nu_b", 1.0);
    plan.hyper.nu_e = h.value("nu_e", 1.0);
  }
  return plan;
}

}  // namespace

struct sshrimp_dataset {
  sshrimp::data::ClusteredDataset ds;
};

struct sshrimp_imputation {
  sshrimp::engine::ImputationSet set;
};

struct sshrimp_table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const {
    std::string out;
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c) out += ',';
      out += header[c];
    }
    out += '\n';
    for (const auto& row : rows) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c) out += ',';
        out += row[c];
      }
      out += '\n';
    }
    return out;
  }

  static sshrimp_table from_csv_text(const std::string& text) {
    sshrimp_table t;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::vector<std::string> fields;
      std::string cur;
      for (char ch : line) {
        if (ch == ',') {
          fields.push_back(cur);
          cur.clear();
        } else {
          cur.push_back(ch);
        }
      }
      fields.push_back(cur);
      if (first) {
        t.header = std::move(fields);
        first = false;
      } else {
        if (fields.size() != t.header.size())
          throw std::runtime_error("line " + std::to_string(line_no) +
                                   ": expected " +
                                   std::to_string(t.header.size()) +
                                   " fields, got " +
                                   std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
      }
    }
    if (first) throw std::runtime_error("CSV is empty");
    return t;
  }
};

extern "C" {

const char* sshrimp_version(void) { return "0.1.0"; }

const char* sshrimp_last_error(void) { return g_last_error.c_str(); }

void sshrimp_string_free(char* s) { std::free(s); }

sshrimp_status sshrimp_dataset_load_csv(const char* path,
                                        const char* options_json,
                                        sshrimp_dataset** out) {
  return guarded([&] {
    if (path == nullptr || out == nullptr)
      throw std::invalid_argument("null argument");
    const json j = parse_options(options_json);
    auto ds = sshrimp::data::ClusteredDataset::load_csv(
        path, parse_csv_options(j), parse_variable_specs(j));
    *out = new sshrimp_dataset{std::move(ds)};
  });
}

sshrimp_status sshrimp_dataset_save_csv(const sshrimp_dataset* ds,
                                        const char* path) {
  return guarded([&] {
    if (ds == nullptr || path == nullptr)
      throw std::invalid_argument("null argument");
    ds->ds.save_csv(path);
  });
}

void sshrimp_dataset_free(sshrimp_dataset* ds) { delete ds; }

int sshrimp_dataset_clusters(const sshrimp_dataset* ds) {
  return ds ? ds->ds.n_clusters() : 0;
}

int sshrimp_dataset_variables(const sshrimp_dataset* ds) {
  return ds ? ds->ds.n_variables() : 0;
}

int64_t sshrimp_dataset_rows(const sshrimp_dataset* ds) {
  return ds ? static_cast<int64_t>(ds->ds.n_rows()) : 0;
}

int64_t sshrimp_dataset_missing_cells(const sshrimp_dataset* ds) {
  return ds ? static_cast<int64_t>(ds->ds.missing_count_total()) : 0;
}

sshrimp_status sshrimp_impute(const sshrimp_dataset* ds,
                              const char* options_json,
                              sshrimp_imputation** out) {
  return guarded([&] {
    if (ds == nullptr || out == nullptr)
      throw std::invalid_argument("null argument");
    const json j = parse_options(options_json);
    const auto plan = parse_plan(j);
    sshrimp::random::RngStream rng(j.value("seed", std::uint64_t{1}));
    auto set = sshrimp::engine::multiple_impute(ds->ds, plan, rng);
    *out = new sshrimp_imputation{std::move(set)};
  });
}

int sshrimp_imputation_copies(const sshrimp_imputation* imp) {
  return imp ? static_cast<int>(imp->set.copies.size()) : 0;
}

sshrimp_status sshrimp_imputation_copy(const sshrimp_imputation* imp,
                                       int index, sshrimp_dataset** out) {
  return guarded([&] {
    if (imp == nullptr || out == nullptr)
      throw std::invalid_argument("null argument");
    if (index < 0 || index >= static_cast<int>(imp->set.copies.size()))
      throw std::invalid_argument("copy index out of range");
    *out = new sshrimp_dataset{imp->set.copies[static_cast<std::size_t>(index)]};
  });
}

sshrimp_status sshrimp_imputation_manifest(const sshrimp_imputation* imp,
                                           char** json_out) {
  return guarded([&] {
    if (imp == nullptr || json_out == nullptr)
      throw std::invalid_argument("null argument");
    *json_out = dup_string(imp->set.manifest_json);
  });
}

sshrimp_status sshrimp_imputation_trace_csv(const sshrimp_imputation* imp,
                                            char** csv_out) {
  return guarded([&] {
    if (imp == nullptr || csv_out == nullptr)
      throw std::invalid_argument("null argument");
    *csv_out = dup_string(sshrimp::engine::traces_to_csv(imp->set.traces));
  });
}

void sshrimp_imputation_free(sshrimp_imputation* imp) { delete imp; }

sshrimp_status sshrimp_simulate(const char* options_json,
                                sshrimp_table** metrics_out,
                                sshrimp_table** records_out) {
  return guarded([&] {
    if (metrics_out == nullptr)
      throw std::invalid_argument("null argument");
    const json j = parse_options(options_json);
    sshrimp::sim::SimConfig cfg;
    cfg.m = j.value("m", cfg.m);
    cfg.d = j.value("d", cfg.d);
    cfg.n_base = j.value("n_base", cfg.n_base);
    cfg.n_extra = j.value("n_extra", cfg.n_extra);
    cfg.p_extra = j.value("p_extra", cfg.p_extra);
    cfg.sigma_diag = j.value("sigma_diag", cfg.sigma_diag);
    cfg.alpha_mis = j.value("alpha_mis", cfg.alpha_mis);
    cfg.beta_mis = j.value("beta_mis", cfg.beta_mis);
    cfg.p_first = j.value("p_first", cfg.p_first);
    cfg.replicates = j.value("replicates", cfg.replicates);
    cfg.analyst_iters = j.value("analyst_iters", cfg.analyst_iters);
    cfg.analyst_burnin = j.value("analyst_burnin", cfg.analyst_burnin);
    cfg.threads = j.value("threads", 0);  // 0 = available cores
    if (j.contains("arms")) {
      const std::string arms = j.at("arms").get<std::string>();
      cfg.arm_cc = arms.find("cc") != std::string::npos;
      cfg.arm_shrimp = arms.find("shrimp") != std::string::npos;
      if (!cfg.arm_cc && !cfg.arm_shrimp)
        throw std::invalid_argument("arms must name cc and/or shrimp");
    }
    auto plan = parse_plan(j);
    plan.copies = j.value("copies", 10);
    plan.threads = 1;  // parallelism lives at the replicate level
    sshrimp::random::RngStream rng(j.value("seed", std::uint64_t{1}));
    const auto result = sshrimp::sim::run_monte_carlo(cfg, plan, rng);
    *metrics_out = new sshrimp_table(
        sshrimp_table::from_csv_text(result.metrics_csv()));
    if (records_out != nullptr)
      *records_out = new sshrimp_table(
          sshrimp_table::from_csv_text(result.records_csv()));
  });
}

sshrimp_status sshrimp_pool(const double* estimates, const double* ses,
                            int copies, sshrimp_pooled* out) {
  return guarded([&] {
    if (estimates == nullptr || ses == nullptr || out == nullptr)
      throw std::invalid_argument("null argument");
    if (copies < 0) throw std::invalid_argument("negative copy count");
    const auto n = static_cast<std::size_t>(copies);
    const auto pooled = sshrimp::pooling::rubin_pool({estimates, n}, {ses, n});
    out->q_bar = pooled.q_bar;
    out->u_bar = pooled.u_bar;
    out->b_between = pooled.b_between;
    out->t_total = pooled.t_total;
    out->df = pooled.df;
    out->ci_low = pooled.ci_low;
    out->ci_high = pooled.ci_high;
    out->fmi = pooled.fmi;
  });
}

sshrimp_status sshrimp_pool_table(const sshrimp_table* in,
                                  sshrimp_table** out) {
  return guarded([&] {
    if (in == nullptr || out == nullptr)
      throw std::invalid_argument("null argument");
    int col_coef = -1;
    int col_est = -1;
    int col_se = -1;
    for (std::size_t c = 0; c < in->header.size(); ++c) {
      if (in->header[c] == "coefficient") col_coef = static_cast<int>(c);
      if (in->header[c] == "estimate") col_est = static_cast<int>(c);
      if (in->header[c] == "se") col_se = static_cast<int>(c);
    }
    if (col_coef < 0 || col_est < 0 || col_se < 0)
      throw std::runtime_error(
          "pool input needs columns: coefficient, estimate, se");

    // Preserve first-appearance order of coefficients.
    std::vector<std::string> order;
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>
        groups;
    for (std::size_t r = 0; r < in->rows.size(); ++r) {
      const auto& row = in->rows[r];
      const std::string& coef = row[static_cast<std::size_t>(col_coef)];
      double est = 0.0;
      double se = 0.0;
      try {
        est = std::stod(row[static_cast<std::size_t>(col_est)]);
        se = std::stod(row[static_cast<std::size_t>(col_se)]);
      } catch (const std::exception&) {
        throw std::runtime_error("line " + std::to_string(r + 2) +
                                 ": non-numeric estimate or se");
      }
      if (groups.find(coef) == groups.end()) order.push_back(coef);
      groups[coef].first.push_back(est);
      groups[coef].second.push_back(se);
    }

    auto table = new sshrimp_table;
    table->header = {"coefficient", "estimate", "se",  "ci_low",
                     "ci_high",     "p_value",  "fmi", "df"};
    char buf[40];
    auto fmt = [&buf](double v) {
      std::snprintf(buf, sizeof buf, "%.8g", v);
      return std::string(buf);
    };
    try {
      for (const auto& coef : order) {
        const auto& [est, se] = groups[coef];
        if (est.size() < 2)
          throw std::runtime_error("coefficient '" + coef +
                                   "' has fewer than 2 copies");
        const auto pooled = sshrimp::pooling::rubin_pool(est, se);
        const double p_value = sshrimp::pooling::pooled_p_value(pooled);
        table->rows.push_back({coef, fmt(pooled.q_bar),
                               fmt(std::sqrt(pooled.t_total)),
                               fmt(pooled.ci_low), fmt(pooled.ci_high),
                               fmt(p_value), fmt(pooled.fmi),
                               fmt(pooled.df)});
      }
    } catch (...) {
      delete table;
      throw;
    }
    *out = table;
  });
}

sshrimp_status sshrimp_table_load_csv(const char* path, sshrimp_table** out) {
  return guarded([&] {
    if (path == nullptr || out == nullptr)
      throw std::invalid_argument("null argument");
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + std::string(path) + "' for reading");
    std::ostringstream text;
    text << in.rdbuf();
    *out = new sshrimp_table(sshrimp_table::from_csv_text(text.str()));
  });
}

sshrimp_status sshrimp_table_save_csv(const sshrimp_table* table,
                                      const char* path) {
  return guarded([&] {
    if (table == nullptr || path == nullptr)
      throw std::invalid_argument("null argument");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + std::string(path) + "' for writing");
    out << table->to_csv();
    if (!out) throw std::runtime_error("write to '" + std::string(path) + "' failed");
  });
}

sshrimp_status sshrimp_table_to_csv(const sshrimp_table* table,
                                    char** csv_out) {
  return guarded([&] {
    if (table == nullptr || csv_out == nullptr)
      throw std::invalid_argument("null argument");
    *csv_out = dup_string(table->to_csv());
  });
}

int sshrimp_table_rows(const sshrimp_table* table) {
  return table ? static_cast<int>(table->rows.size()) : 0;
}

int sshrimp_table_columns(const sshrimp_table* table) {
  return table ? static_cast<int>(table->header.size()) : 0;
}

const char* sshrimp_table_cell(const sshrimp_table* table, int row, int col) {
  if (table == nullptr || col < 0 ||
      col >= static_cast<int>(table->header.size()))
    return nullptr;
  if (row == -1) return table->header[static_cast<std::size_t>(col)].c_str();
  if (row < 0 || row >= static_cast<int>(table->rows.size())) return nullptr;
  return table->rows[static_cast<std::size_t>(row)]
                    [static_cast<std::size_t>(col)]
      .c_str();
}

void sshrimp_table_free(sshrimp_table* table) { delete table; }

sshrimp_status sshrimp_selftest(const char* options_json, char** report_out,
                                int* failures_out) {
  return guarded([&] {
    const json j = parse_options(options_json);
    sshrimp::selftest::Options opt;
    opt.seed = j.value("seed", opt.seed);
    opt.quick = j.value("quick", false);
    opt.inject_fault = j.value("inject_fault", false);
    const auto reports = sshrimp::selftest::run_all(opt);
    std::string text;
    int failures = 0;
    for (const auto& report : reports) {
      text += report.text();
      for (const auto& check : report.checks)
        if (!check.pass) ++failures;
    }
    if (report_out != nullptr) *report_out = dup_string(text);
    if (failures_out != nullptr) *failures_out = failures;
  });
}

}  // extern "C"
