#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sshrimp::data {

enum class Scale { Continuous, Binary };

// Whether the spike-and-slab applies to this variable when it enters a
// regression as a covariate. Forced covariates always stay in the model.
enum class Policy { Undetermined, Forced };

struct VariableSpec {
  std::string name;
  Scale scale = Scale::Continuous;
  Policy policy = Policy::Undetermined;
};

struct CsvOptions {
  std::string missing_token = "NA";
  // Name of the cluster-id column; empty selects the first column.
  std::string cluster_column;
  // Opt-in: classify columns whose observed values all lie in {0, 1} as
  // binary. Off by default so 0/1-coded continuous data is never silently
  // reclassified.
  bool infer_binary = false;
};

// Regression data for one target variable: the target keeps its missing
// flags, every other variable enters the design at its current value.
// Rows are grouped by cluster in dataset order.
struct RegressionView {
  int target = -1;
  bool has_intercept = false;
  Eigen::MatrixXd x;                    // N x p design
  Eigen::VectorXd y;                    // current target values
  std::vector<std::uint8_t> y_missing;  // per-row: target cell masked
  std::vector<int> cluster_of_row;      // N entries in 0..m-1
  std::vector<int> cluster_sizes;       // m entries
  std::vector<Policy> policies;         // per design column
  Scale target_scale = Scale::Continuous;

  Eigen::Index rows() const { return x.rows(); }
  Eigen::Index cols() const { return x.cols(); }
  int clusters() const { return static_cast<int>(cluster_sizes.size()); }
  std::size_t missing_count() const;
};

// Clustered values with an immutable missing mask. Cells flagged by the mask
// start unfilled (NaN) and may be rewritten through write_back; observed
// cells never change after construction.
class ClusteredDataset {
 public:
  // In-memory construction. `cluster_values[i]` is the n_i x d block of
  // cluster i; NaN cells are treated as missing.
  ClusteredDataset(std::vector<VariableSpec> specs,
                   std::vector<std::string> cluster_ids,
                   const std::vector<Eigen::MatrixXd>& cluster_values);

  static ClusteredDataset load_csv(const std::string& path,
                                   const CsvOptions& options,
                                   std::vector<VariableSpec> specs = {});
  static ClusteredDataset load_csv_stream(std::istream& in,
                                          const CsvOptions& options,
                                          std::vector<VariableSpec> specs = {});
  void save_csv(const std::string& path) const;
  void save_csv_stream(std::ostream& out) const;

  int n_clusters() const { return static_cast<int>(cluster_ids_.size()); }
  int n_variables() const { return static_cast<int>(specs_.size()); }
  std::size_t n_rows() const { return offsets_.back(); }
  std::size_t rows_in_cluster(int i) const {
    return offsets_[static_cast<std::size_t>(i) + 1] - offsets_[i];
  }
  const std::string& cluster_id(int i) const { return cluster_ids_[i]; }
  const std::vector<VariableSpec>& specs() const { return specs_; }
  const std::string& cluster_column_name() const { return cluster_column_; }
  const std::string& missing_token() const { return missing_token_; }

  double value(std::size_t row, int var) const { return values_(row, var); }
  bool cell_missing(std::size_t row, int var) const {
    return mask_[row * specs_.size() + static_cast<std::size_t>(var)] != 0;
  }
  bool cell_unfilled(std::size_t row, int var) const {
    return std::isnan(values_(row, var));
  }

  std::size_t missing_count(int var) const;
  std::size_t missing_count_total() const;
  std::size_t unfilled_count_total() const;

  // Variable indices sorted by ascending missing count, ties broken by
  // ascending original index.
  std::vector<int> missing_order() const;

  RegressionView regression_view(int target, bool include_intercept) const;

  // Overwrites the masked cells of `target` with `values`, ordered by the
  // dataset's row order restricted to masked cells. Observed cells are
  // untouchable; binary targets accept only 0 or 1.
  void write_back(int target, std::span<const double> values);
  // Single-cell form; rejects writes to observed cells.
  void write_back_cell(std::size_t row, int var, double v);

  // Masked-cell values of one variable in write_back order (NaN where
  // unfilled).
  std::vector<double> masked_values(int target) const;

  // True when both datasets agree bit-for-bit on every observed cell (and on
  // shape, specs and masks). Imputed cells are ignored.
  bool observed_cells_equal(const ClusteredDataset& other) const;

  const Eigen::MatrixXd& values() const { return values_; }

 private:
  ClusteredDataset() = default;
  void validate_binary_columns() const;

  std::vector<VariableSpec> specs_;
  std::vector<std::string> cluster_ids_;
  std::vector<std::size_t> offsets_;      // m + 1 row offsets
  std::vector<std::size_t> source_rows_;  // original file order, for save_csv
  Eigen::MatrixXd values_;                // N x d; NaN = unfilled missing cell
  std::vector<std::uint8_t> mask_;        // N x d row-major; 1 = was missing
  std::string cluster_column_ = "cluster";
  std::string missing_token_ = "NA";
};

}  // namespace sshrimp::data
