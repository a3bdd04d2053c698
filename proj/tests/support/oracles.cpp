#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace oracles {

namespace {

double simpson(double a, double fa, double b, double fb, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive(const std::function<double(double)>& f, double a, double fa,
                double b, double fb, double m, double fm, double whole,
                double tol, int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(a, fa, m, fm, flm);
  const double right = simpson(m, fm, b, fb, frm);
  if (depth <= 0 || std::fabs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1) +
         adaptive(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double lo, double hi,
                 double tol) {
  const double m = 0.5 * (lo + hi);
  const double flo = f(lo);
  const double fhi = f(hi);
  const double fm = f(m);
  return adaptive(f, lo, flo, hi, fhi, m, fm, simpson(lo, flo, hi, fhi, fm),
                  tol, 48);
}

double spike_prob_by_quadrature(const Eigen::VectorXd& x,
                                const Eigen::VectorXd& resid,
                                const Eigen::VectorXd& weight, double w,
                                double mu0, double sigma0_sq) {
  const auto n = x.size();
  if (resid.size() != n || weight.size() != n)
    throw std::invalid_argument("oracle: shape mismatch");

  // log L(beta) - log L(0), summed observation by observation.
  auto log_lik_shift = [&](double beta) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d = resid(j) - x(j) * beta;
      s += -0.5 * weight(j) * (d * d - resid(j) * resid(j));
    }
    return s;
  };

  const double sigma0 = std::sqrt(sigma0_sq);
  auto log_integrand = [&](double beta) {
    const double z = (beta - mu0) / sigma0;
    const double log_prior =
        -0.5 * z * z - std::log(sigma0) - 0.918938533204672742;  // log sqrt(2pi)
    return log_prior + log_lik_shift(beta);
  };

  double sxx = 0.0;
  double sxr = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    sxx += weight(j) * x(j) * x(j);
    sxr += weight(j) * x(j) * resid(j);
  }
  const double like_sd = sxx > 0.0 ? 1.0 / std::sqrt(sxx) : sigma0;
  const double like_mean = sxx > 0.0 ? sxr / sxx : mu0;
  const double lo = std::min(mu0 - 14.0 * sigma0, like_mean - 14.0 * like_sd);
  const double hi = std::max(mu0 + 14.0 * sigma0, like_mean + 14.0 * like_sd);

  // Normalize by a grid scan of the log integrand so the exponentials stay
  // O(1), then split the range at the scanned mode so the adaptive rule
  // cannot step over a narrow peak.
  const int grid = 4096;
  double peak = -std::numeric_limits<double>::infinity();
  double mode = mu0;
  for (int g = 0; g <= grid; ++g) {
    const double beta = lo + (hi - lo) * g / grid;
    const double v = log_integrand(beta);
    if (v > peak) {
      peak = v;
      mode = beta;
    }
  }
  auto integrand = [&](double beta) {
    return std::exp(log_integrand(beta) - peak);
  };
  const double slab_integral = integrate(integrand, lo, mode, 1e-12) +
                               integrate(integrand, mode, hi, 1e-12);
  const double log_ratio = std::log(w) - std::log1p(-w) + peak +
                           std::log(slab_integral);
  // p_spike = 1 / (1 + exp(log_ratio)), computed stably.
  if (log_ratio > 0.0) {
    const double e = std::exp(-log_ratio);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(log_ratio));
}

Eigen::VectorXd gls_estimate(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             std::span<const int> cluster_sizes,
                             double sigma_e_sq, double sigma_b_sq) {
  const auto p = x.cols();
  Eigen::MatrixXd xtvx = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd xtvy = Eigen::VectorXd::Zero(p);
  Eigen::Index row0 = 0;
  for (int n_i : cluster_sizes) {
    const auto xi = x.middleRows(row0, n_i);
    const auto yi = y.segment(row0, n_i);
    const double shrink = sigma_b_sq / (sigma_e_sq + n_i * sigma_b_sq);
    const Eigen::VectorXd xsum = xi.colwise().sum();
    const double ysum = yi.sum();
    xtvx += (xi.transpose() * xi - shrink * xsum * xsum.transpose()) / sigma_e_sq;
    xtvy += (xi.transpose() * yi - shrink * xsum * ysum) / sigma_e_sq;
    row0 += n_i;
  }
  return xtvx.ldlt().solve(xtvy);
}

double ks_one_sample(std::vector<double> draws,
                     const std::function<double(double)>& cdf) {
  std::sort(draws.begin(), draws.end());
  const double n = static_cast<double>(draws.size());
  double d = 0.0;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const double f = cdf(draws[i]);
    d = std::max(d, std::fabs(f - static_cast<double>(i) / n));
    d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - f));
  }
  return d;
}

double mean(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_sd(std::span<const double> xs) {
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

double se_of_mean(std::span<const double> xs) {
  return sample_sd(xs) / std::sqrt(static_cast<double>(xs.size()));
}

}  // namespace oracles
