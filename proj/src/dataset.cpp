#include "dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace sshrimp::data {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void fail(const std::string& msg) {
  throw std::runtime_error(msg);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& field, std::size_t line_no,
                    const std::string& column) {
  const std::string t = trim(field);
  double out = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last || !std::isfinite(out)) {
    fail("line " + std::to_string(line_no) + ": non-numeric value '" + t +
         "' in column '" + column + "'");
  }
  return out;
}

void format_value(std::string& out, double v) {
  char buf[40];
  if (v == static_cast<long long>(v) && std::fabs(v) < 1e15) {
    std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(v));
  } else {
    // 17 significant digits round-trip any double exactly.
    std::snprintf(buf, sizeof buf, "%.17g", v);
  }
  out += buf;
}

}  // namespace

std::size_t RegressionView::missing_count() const {
  std::size_t n = 0;
  for (auto f : y_missing) n += f;
  return n;
}

ClusteredDataset::ClusteredDataset(
    std::vector<VariableSpec> specs, std::vector<std::string> cluster_ids,
    const std::vector<Eigen::MatrixXd>& cluster_values) {
  if (specs.size() < 2) fail("dataset needs at least 2 variables");
  if (cluster_ids.empty() || cluster_ids.size() != cluster_values.size())
    fail("cluster ids and value blocks must match and be non-empty");
  for (std::size_t i = 0; i < specs.size(); ++i)
    for (std::size_t j = i + 1; j < specs.size(); ++j)
      if (specs[i].name == specs[j].name)
        fail("duplicate variable name '" + specs[i].name + "'");

  specs_ = std::move(specs);
  cluster_ids_ = std::move(cluster_ids);
  const int d = n_variables();
  std::size_t total = 0;
  offsets_.push_back(0);
  for (const auto& block : cluster_values) {
    if (block.rows() < 1) fail("empty cluster");
    if (block.cols() != d) fail("cluster block has wrong number of columns");
    total += static_cast<std::size_t>(block.rows());
    offsets_.push_back(total);
  }
  values_.resize(static_cast<Eigen::Index>(total), d);
  mask_.assign(total * static_cast<std::size_t>(d), 0);
  source_rows_.resize(total);
  std::iota(source_rows_.begin(), source_rows_.end(), std::size_t{0});
  std::size_t row = 0;
  for (const auto& block : cluster_values) {
    for (Eigen::Index r = 0; r < block.rows(); ++r, ++row) {
      for (int k = 0; k < d; ++k) {
        const double v = block(r, k);
        values_(static_cast<Eigen::Index>(row), k) = v;
        if (std::isnan(v)) mask_[row * static_cast<std::size_t>(d) + k] = 1;
      }
    }
  }
  validate_binary_columns();
}

void ClusteredDataset::validate_binary_columns() const {
  for (int k = 0; k < n_variables(); ++k) {
    if (specs_[k].scale != Scale::Binary) continue;
    for (std::size_t r = 0; r < n_rows(); ++r) {
      const double v = values_(static_cast<Eigen::Index>(r), k);
      if (!std::isnan(v) && v != 0.0 && v != 1.0)
        fail("binary variable '" + specs_[k].name +
             "' holds a value outside {0,1}");
    }
  }
}

ClusteredDataset ClusteredDataset::load_csv(const std::string& path,
                                            const CsvOptions& options,
                                            std::vector<VariableSpec> specs) {
  std::ifstream in(path);
  if (!in) fail("cannot open '" + path + "' for reading");
  return load_csv_stream(in, options, std::move(specs));
}

ClusteredDataset ClusteredDataset::load_csv_stream(
    std::istream& in, const CsvOptions& options,
    std::vector<VariableSpec> specs) {
  std::string line;
  if (!std::getline(in, line)) fail("empty CSV: missing header row");
  const auto header = split_csv_line(line);
  if (header.size() < 3) fail("CSV needs a cluster column and >= 2 variables");

  // Locate the cluster-id column.
  std::size_t cluster_col = 0;
  if (!options.cluster_column.empty()) {
    auto it = std::find(header.begin(), header.end(), options.cluster_column);
    if (it == header.end())
      fail("cluster column '" + options.cluster_column + "' not in header");
    cluster_col = static_cast<std::size_t>(it - header.begin());
  }

  std::vector<std::string> var_names;
  std::vector<std::size_t> var_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == cluster_col) continue;
    var_names.push_back(trim(header[c]));
    var_cols.push_back(c);
  }
  for (std::size_t i = 0; i < var_names.size(); ++i)
    for (std::size_t j = i + 1; j < var_names.size(); ++j)
      if (var_names[i] == var_names[j])
        fail("duplicate header name '" + var_names[i] + "'");

  // Reconcile provided specs with the header.
  std::vector<VariableSpec> resolved;
  if (specs.empty()) {
    for (const auto& n : var_names) resolved.push_back({n});
  } else {
    std::unordered_map<std::string, VariableSpec> by_name;
    for (auto& s : specs) by_name[s.name] = s;
    for (const auto& n : var_names) {
      auto it = by_name.find(n);
      resolved.push_back(it == by_name.end() ? VariableSpec{n} : it->second);
    }
  }
  const int d = static_cast<int>(resolved.size());
  if (d < 2) fail("dataset needs at least 2 variables");

  struct RawRow {
    std::string cluster;
    std::vector<double> values;  // NaN = missing token
    std::size_t source;
  };
  std::vector<RawRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      fail("line " + std::to_string(line_no) + ": expected " +
           std::to_string(header.size()) + " fields, got " +
           std::to_string(fields.size()));
    RawRow row;
    row.cluster = trim(fields[cluster_col]);
    row.source = rows.size();
    for (std::size_t v = 0; v < var_cols.size(); ++v) {
      const std::string cell = trim(fields[var_cols[v]]);
      if (cell == options.missing_token) {
        row.values.push_back(kNaN);
      } else {
        row.values.push_back(parse_number(cell, line_no, var_names[v]));
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail("CSV has no data rows");

  if (options.infer_binary) {
    for (int k = 0; k < d; ++k) {
      bool all01 = true;
      bool any = false;
      for (const auto& r : rows) {
        const double v = r.values[static_cast<std::size_t>(k)];
        if (std::isnan(v)) continue;
        any = true;
        if (v != 0.0 && v != 1.0) {
          all01 = false;
          break;
        }
      }
      if (any && all01) resolved[static_cast<std::size_t>(k)].scale = Scale::Binary;
    }
  }

  // Group rows by cluster id, clusters ordered by first appearance.
  std::vector<std::string> cluster_ids;
  std::unordered_map<std::string, int> cluster_index;
  for (const auto& r : rows) {
    if (cluster_index.emplace(r.cluster, static_cast<int>(cluster_ids.size()))
            .second)
      cluster_ids.push_back(r.cluster);
  }

  ClusteredDataset ds;
  ds.specs_ = std::move(resolved);
  ds.cluster_ids_ = std::move(cluster_ids);
  ds.cluster_column_ =
      options.cluster_column.empty() ? trim(header[cluster_col])
                                     : options.cluster_column;
  ds.missing_token_ = options.missing_token;

  const int m = ds.n_clusters();
  std::vector<std::size_t> counts(static_cast<std::size_t>(m), 0);
  for (const auto& r : rows) ++counts[cluster_index[r.cluster]];
  ds.offsets_.assign(1, 0);
  for (int i = 0; i < m; ++i) ds.offsets_.push_back(ds.offsets_.back() + counts[i]);

  const std::size_t total = rows.size();
  ds.values_.resize(static_cast<Eigen::Index>(total), d);
  ds.mask_.assign(total * static_cast<std::size_t>(d), 0);
  ds.source_rows_.resize(total);
  std::vector<std::size_t> cursor(ds.offsets_.begin(), ds.offsets_.end() - 1);
  for (const auto& r : rows) {
    const std::size_t dest = cursor[cluster_index[r.cluster]]++;
    ds.source_rows_[dest] = r.source;
    for (int k = 0; k < d; ++k) {
      const double v = r.values[static_cast<std::size_t>(k)];
      ds.values_(static_cast<Eigen::Index>(dest), k) = v;
      if (std::isnan(v)) ds.mask_[dest * static_cast<std::size_t>(d) + k] = 1;
    }
  }
  ds.validate_binary_columns();
  return ds;
}

void ClusteredDataset::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) fail("cannot open '" + path + "' for writing");
  save_csv_stream(out);
  if (!out) fail("write to '" + path + "' failed");
}

void ClusteredDataset::save_csv_stream(std::ostream& out) const {
  std::string buf = cluster_column_;
  for (const auto& s : specs_) {
    buf += ',';
    buf += s.name;
  }
  buf += '\n';
  // Emit rows in their original file order.
  std::vector<std::size_t> by_source(n_rows());
  for (std::size_t r = 0; r < n_rows(); ++r) by_source[source_rows_[r]] = r;
  for (std::size_t s = 0; s < n_rows(); ++s) {
    const std::size_t r = by_source[s];
    int cluster = 0;
    while (offsets_[static_cast<std::size_t>(cluster) + 1] <= r) ++cluster;
    buf += cluster_ids_[cluster];
    for (int k = 0; k < n_variables(); ++k) {
      buf += ',';
      const double v = values_(static_cast<Eigen::Index>(r), k);
      if (std::isnan(v)) {
        buf += missing_token_;
      } else {
        format_value(buf, v);
      }
    }
    buf += '\n';
  }
  out << buf;
}

std::size_t ClusteredDataset::missing_count(int var) const {
  std::size_t n = 0;
  for (std::size_t r = 0; r < n_rows(); ++r)
    n += mask_[r * static_cast<std::size_t>(n_variables()) + var];
  return n;
}

std::size_t ClusteredDataset::missing_count_total() const {
  std::size_t n = 0;
  for (auto f : mask_) n += f;
  return n;
}

std::size_t ClusteredDataset::unfilled_count_total() const {
  std::size_t n = 0;
  for (std::size_t r = 0; r < n_rows(); ++r)
    for (int k = 0; k < n_variables(); ++k)
      n += std::isnan(values_(static_cast<Eigen::Index>(r), k)) ? 1 : 0;
  return n;
}

std::vector<int> ClusteredDataset::missing_order() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(n_variables()));
  for (int k = 0; k < n_variables(); ++k) counts[k] = missing_count(k);
  std::vector<int> order(static_cast<std::size_t>(n_variables()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return counts[static_cast<std::size_t>(a)] <
           counts[static_cast<std::size_t>(b)];
  });
  return order;
}

RegressionView ClusteredDataset::regression_view(int target,
                                                 bool include_intercept) const {
  if (target < 0 || target >= n_variables())
    fail("regression_view: target index out of range");
  const int d = n_variables();
  const std::size_t n = n_rows();

  RegressionView view;
  view.target = target;
  view.has_intercept = include_intercept;
  view.target_scale = specs_[static_cast<std::size_t>(target)].scale;
  const int p = d - 1 + (include_intercept ? 1 : 0);
  view.x.resize(static_cast<Eigen::Index>(n), p);
  view.y.resize(static_cast<Eigen::Index>(n));
  view.y_missing.resize(n);
  view.cluster_of_row.resize(n);
  view.cluster_sizes.resize(static_cast<std::size_t>(n_clusters()));
  for (int i = 0; i < n_clusters(); ++i)
    view.cluster_sizes[static_cast<std::size_t>(i)] =
        static_cast<int>(rows_in_cluster(i));
  if (include_intercept) {
    view.x.col(0).setOnes();
    view.policies.push_back(Policy::Forced);
  }
  int col = include_intercept ? 1 : 0;
  for (int k = 0; k < d; ++k) {
    if (k == target) continue;
    for (std::size_t r = 0; r < n; ++r) {
      const double v = values_(static_cast<Eigen::Index>(r), k);
      if (std::isnan(v))
        fail("regression_view: covariate '" + specs_[k].name +
             "' has an unfilled missing cell");
      view.x(static_cast<Eigen::Index>(r), col) = v;
    }
    view.policies.push_back(specs_[static_cast<std::size_t>(k)].policy);
    ++col;
  }
  int cluster = 0;
  for (std::size_t r = 0; r < n; ++r) {
    while (offsets_[static_cast<std::size_t>(cluster) + 1] <= r) ++cluster;
    view.cluster_of_row[r] = cluster;
    view.y(static_cast<Eigen::Index>(r)) =
        values_(static_cast<Eigen::Index>(r), target);
    view.y_missing[r] =
        mask_[r * static_cast<std::size_t>(d) + static_cast<std::size_t>(target)];
  }
  return view;
}

void ClusteredDataset::write_back_cell(std::size_t row, int var, double v) {
  if (var < 0 || var >= n_variables() || row >= n_rows())
    fail("write_back: cell index out of range");
  if (!cell_missing(row, var))
    fail("write_back: cell (" + std::to_string(row) + ", " +
         std::to_string(var) + ") is observed and cannot be written");
  if (!std::isfinite(v)) fail("write_back: non-finite imputed value");
  if (specs_[static_cast<std::size_t>(var)].scale == Scale::Binary && v != 0.0 &&
      v != 1.0)
    fail("write_back: binary variable '" +
         specs_[static_cast<std::size_t>(var)].name +
         "' given a value outside {0,1}");
  values_(static_cast<Eigen::Index>(row), var) = v;
}

void ClusteredDataset::write_back(int target, std::span<const double> values) {
  if (target < 0 || target >= n_variables())
    fail("write_back: target index out of range");
  const std::size_t expected = missing_count(target);
  if (values.size() != expected)
    fail("write_back: got " + std::to_string(values.size()) +
         " values for " + std::to_string(expected) + " masked cells");
  std::size_t idx = 0;
  for (std::size_t r = 0; r < n_rows(); ++r) {
    if (!cell_missing(r, target)) continue;
    write_back_cell(r, target, values[idx++]);
  }
}

std::vector<double> ClusteredDataset::masked_values(int target) const {
  std::vector<double> out;
  for (std::size_t r = 0; r < n_rows(); ++r)
    if (cell_missing(r, target))
      out.push_back(values_(static_cast<Eigen::Index>(r), target));
  return out;
}

bool ClusteredDataset::observed_cells_equal(const ClusteredDataset& other) const {
  if (n_variables() != other.n_variables() || n_rows() != other.n_rows() ||
      n_clusters() != other.n_clusters() || mask_ != other.mask_)
    return false;
  for (std::size_t r = 0; r < n_rows(); ++r) {
    for (int k = 0; k < n_variables(); ++k) {
      if (cell_missing(r, k)) continue;
      const double a = values_(static_cast<Eigen::Index>(r), k);
      const double b = other.values_(static_cast<Eigen::Index>(r), k);
      if (std::memcmp(&a, &b, sizeof(double)) != 0) return false;
    }
  }
  return true;
}

}  // namespace sshrimp::data
