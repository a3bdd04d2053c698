#include "pooling.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mathutil.hpp"

namespace sshrimp::pooling {

namespace {
constexpr double kZ975 = 1.959963984540054;
}

double student_t_quantile_975(double df) {
  if (!std::isfinite(df)) return kZ975;
  boost::math::students_t_distribution<double> dist(df);
  return boost::math::quantile(dist, 0.975);
}

PooledEstimate rubin_pool(std::span<const double> estimates,
                          std::span<const double> ses) {
  const std::size_t m = estimates.size();
  if (m < 2) throw std::invalid_argument("rubin_pool: need at least 2 copies");
  if (ses.size() != m)
    throw std::invalid_argument("rubin_pool: estimates/ses length mismatch");
  for (double s : ses)
    if (!(s > 0.0) || !std::isfinite(s))
      throw std::invalid_argument("rubin_pool: standard errors must be > 0");

  PooledEstimate out;
  out.q_bar = mean_of(estimates);
  double u = 0.0;
  for (double s : ses) u += s * s;
  out.u_bar = u / static_cast<double>(m);
  out.b_between = variance_of(estimates);
  const double m_factor = 1.0 + 1.0 / static_cast<double>(m);
  out.t_total = out.u_bar + m_factor * out.b_between;

  if (out.b_between == 0.0) {
    out.df = std::numeric_limits<double>::infinity();
    out.fmi = 0.0;
  } else {
    const double ratio = out.u_bar / (m_factor * out.b_between);
    out.df = static_cast<double>(m - 1) * (1.0 + ratio) * (1.0 + ratio);
    const double r = m_factor * out.b_between / out.u_bar;
    out.fmi = (r + 2.0 / (out.df + 3.0)) / (r + 1.0);
  }
  const double half = student_t_quantile_975(out.df) * std::sqrt(out.t_total);
  out.ci_low = out.q_bar - half;
  out.ci_high = out.q_bar + half;
  return out;
}

double pooled_p_value(const PooledEstimate& pooled) {
  const double stat = std::fabs(pooled.q_bar) / std::sqrt(pooled.t_total);
  if (!std::isfinite(pooled.df)) {
    boost::math::normal_distribution<double> dist;
    return 2.0 * boost::math::cdf(dist, -stat);
  }
  boost::math::students_t_distribution<double> dist(pooled.df);
  return 2.0 * boost::math::cdf(dist, -stat);
}

Metrics compute_metrics(double truth,
                        std::span<const PooledEstimate> replicates) {
  if (replicates.empty())
    throw std::invalid_argument("compute_metrics: need >= 1 replicate");
  Metrics out;
  double sum_q = 0.0;
  double sum_sq_err = 0.0;
  double sum_se = 0.0;
  double sum_fmi = 0.0;
  std::size_t covered = 0;
  for (const auto& p : replicates) {
    sum_q += p.q_bar;
    sum_sq_err += (p.q_bar - truth) * (p.q_bar - truth);
    sum_se += std::sqrt(p.t_total);
    sum_fmi += p.fmi;
    if (p.ci_low <= truth && truth <= p.ci_high) ++covered;
  }
  const auto n = static_cast<double>(replicates.size());
  const double bias = sum_q / n - truth;
  if (truth == 0.0) {
    out.pb = std::fabs(bias);
    out.pb_is_absolute = true;
  } else {
    out.pb = 100.0 * std::fabs(bias) / std::fabs(truth);
  }
  out.rmse = std::sqrt(sum_sq_err / n);
  out.se = sum_se / n;
  out.cr = static_cast<double>(covered) / n;
  out.fmi = sum_fmi / n;
  return out;
}

}  // namespace sshrimp::pooling
