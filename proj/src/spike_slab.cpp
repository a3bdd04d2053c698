#include "spike_slab.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mathutil.hpp"

namespace sshrimp::spikeslab {

int SpikeSlabState::included_count() const {
  int n = 0;
  for (auto f : included) n += f;
  return n;
}

CoordDraw draw_spike_slab_coord(double precision, double score, double w,
                                double mu0, double sigma0_sq, Policy policy,
                                double slab_var_inflation, RngStream& rng) {
  if (!(precision > 0.0) || !std::isfinite(precision) || !std::isfinite(score))
    throw std::runtime_error(
        "spike-slab coordinate update: degenerate design column "
        "(zero or non-finite precision)");

  const double v_true = 1.0 / (precision + 1.0 / sigma0_sq);
  const double mu_hat = v_true * (mu0 / sigma0_sq + score);
  const double v_hat = v_true * slab_var_inflation;

  CoordDraw out;
  if (policy == Policy::Forced) {
    out.beta = random::draw_normal(rng, mu_hat, v_hat);
    out.included = true;
    out.spike_prob = 0.0;
    return out;
  }

  double spike_prob;
  if (w >= 1.0) {
    spike_prob = 0.0;
  } else if (w <= 0.0) {
    spike_prob = 1.0;
  } else {
    const double m = score / precision;
    const double log_w1 =
        std::log1p(-w) + log_normal_pdf(0.0, m, 1.0 / precision);
    const double log_w2 =
        std::log(w) + log_normal_pdf(mu0, m, sigma0_sq + 1.0 / precision);
    if (!std::isfinite(log_w1) && !std::isfinite(log_w2))
      throw std::runtime_error(
          "spike-slab coordinate update: non-finite mixture weights");
    spike_prob = sigmoid(log_w1 - log_w2);
  }
  out.spike_prob = spike_prob;
  if (rng.uniform() < spike_prob) {
    out.beta = 0.0;  // exact spike, not merely small
    out.included = false;
  } else {
    out.beta = random::draw_normal(rng, mu_hat, v_hat);
    out.included = true;
  }
  return out;
}

double update_w(const SpikeSlabState& state, std::span<const Policy> policies,
                const Hyper& hyper, RngStream& rng) {
  int on = 0;
  int off = 0;
  for (int k = 0; k < state.dim(); ++k) {
    if (policies[static_cast<std::size_t>(k)] == Policy::Forced) continue;
    if (state.included[static_cast<std::size_t>(k)])
      ++on;
    else
      ++off;
  }
  return random::draw_beta(rng, hyper.a_w + on, hyper.b_w + off);
}

double update_mu0(const SpikeSlabState& state, RngStream& rng) {
  double sum_beta = 0.0;
  int n_inc = 0;
  for (int k = 0; k < state.dim(); ++k) {
    if (state.included[static_cast<std::size_t>(k)]) {
      sum_beta += state.beta(k);
      ++n_inc;
    }
  }
  const double var = 1.0 / (1.0 + n_inc / state.sigma0_sq);
  return random::draw_normal(rng, var * sum_beta / state.sigma0_sq, var);
}

double update_sigma0_sq(const SpikeSlabState& state, RngStream& rng) {
  double ss = 0.0;
  int n_inc = 0;
  for (int k = 0; k < state.dim(); ++k) {
    if (state.included[static_cast<std::size_t>(k)]) {
      const double d = state.beta(k) - state.mu0;
      ss += d * d;
      ++n_inc;
    }
  }
  return random::draw_inverse_gamma(rng, 1.0 + 0.5 * n_inc, 1.0 + 0.5 * ss);
}

double update_sigma_b_sq(const Eigen::VectorXd& b, double nu_b,
                         RngStream& rng) {
  const double df = nu_b + static_cast<double>(b.size());
  const double numer = nu_b + b.squaredNorm();
  return random::draw_scaled_inv_chisq(rng, df, numer / df);
}

SpikeSlabState make_initial_coef(std::span<const Policy> policies,
                                 const Hyper& hyper, RngStream& rng) {
  SpikeSlabState coef;
  const int p = static_cast<int>(policies.size());
  coef.beta = Eigen::VectorXd::Zero(p);
  coef.included.assign(static_cast<std::size_t>(p), 0);
  coef.w = hyper.a_w / (hyper.a_w + hyper.b_w);
  coef.mu0 = 0.0;
  coef.sigma0_sq = 1.0;
  for (int k = 0; k < p; ++k) {
    if (policies[static_cast<std::size_t>(k)] == Policy::Forced) {
      coef.beta(k) = random::draw_normal(rng, coef.mu0, coef.sigma0_sq);
      coef.included[static_cast<std::size_t>(k)] = 1;
    }
  }
  return coef;
}

std::vector<int> scan_indices(int p, ScanOrder order, RngStream& rng) {
  std::vector<int> idx(static_cast<std::size_t>(p));
  std::iota(idx.begin(), idx.end(), 0);
  if (order == ScanOrder::RandomScan) {
    for (int i = p - 1; i > 0; --i) {
      const auto j = static_cast<int>(rng.next_u64() % (static_cast<std::uint64_t>(i) + 1));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
  }
  return idx;
}

}  // namespace sshrimp::spikeslab
