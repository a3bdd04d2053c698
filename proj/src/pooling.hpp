#pragma once

#include <span>

namespace sshrimp::pooling {

// Rubin-combined inference for one scalar estimand across M imputed copies.
struct PooledEstimate {
  double q_bar = 0.0;      // pooled point estimate
  double u_bar = 0.0;      // within-imputation variance
  double b_between = 0.0;  // between-imputation variance
  double t_total = 0.0;    // u_bar + (1 + 1/M) b_between
  double df = 0.0;         // small-M degrees of freedom (inf when B = 0)
  double ci_low = 0.0;
  double ci_high = 0.0;
  double fmi = 0.0;        // fraction of missing information, in [0, 1]
};

// Standard Rubin algebra:
//   Q  = mean(estimates), U = mean(se^2), B = var(estimates),
//   T  = U + (1 + 1/M) B,
//   df = (M - 1) (1 + U / ((1 + 1/M) B))^2,
//   CI = Q +- t_{df, 0.975} sqrt(T),
//   FMI = (r + 2/(df + 3)) / (r + 1),  r = (1 + 1/M) B / U.
// B = 0 degenerates to FMI = 0 and a normal-quantile interval.
PooledEstimate rubin_pool(std::span<const double> estimates,
                          std::span<const double> ses);

// Two-sided p-value for the estimand being zero under the pooled t
// reference distribution.
double pooled_p_value(const PooledEstimate& pooled);

struct Metrics {
  double pb = 0.0;    // percent bias; absolute bias when truth == 0
  double rmse = 0.0;
  double se = 0.0;    // average pooled standard error
  double cr = 0.0;    // 95% coverage rate
  double fmi = 0.0;   // average FMI
  bool pb_is_absolute = false;
};

// Study metrics across replicates against a fixed truth.
Metrics compute_metrics(double truth,
                        std::span<const PooledEstimate> replicates);

double student_t_quantile_975(double df);

}  // namespace sshrimp::pooling
