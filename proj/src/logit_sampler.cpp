#include "logit_sampler.hpp"

#include <cmath>
#include <stdexcept>

#include "mathutil.hpp"

namespace sshrimp::logit {

LogitState make_initial_state(const RegressionView& view, const Hyper& hyper,
                              RngStream& rng) {
  LogitState state;
  state.coef = spikeslab::make_initial_coef(view.policies, hyper, rng);
  state.b = Eigen::VectorXd::Zero(view.clusters());
  state.sigma_b_sq = 1.0;
  // Placeholder at the PG(1, 0) mean; the first cycle redraws omega before
  // any update consumes it.
  state.omega = Eigen::VectorXd::Constant(view.rows(), 0.25);
  return state;
}

Chain::Chain(const RegressionView& view, const Hyper& hyper,
             const ChainConfig& config, LogitState state)
    : view_(view), hyper_(hyper), config_(config), state_(std::move(state)) {
  if (state_.coef.dim() != view_.cols())
    throw std::invalid_argument("logit chain: state/view dimension mismatch");
  if (state_.b.size() != view_.clusters() ||
      state_.omega.size() != view_.rows())
    throw std::invalid_argument("logit chain: state has wrong shape");
  if (view_.rows() == 0)
    throw std::invalid_argument("logit chain: empty view");
  y_ = view_.y;
  for (Eigen::Index r = 0; r < y_.size(); ++r) {
    if (std::isnan(y_(r)))
      throw std::invalid_argument(
          "logit chain: response has unfilled cells; run an initial fill first");
    if (y_(r) != 0.0 && y_(r) != 1.0)
      throw std::invalid_argument("logit chain: responses must be 0 or 1");
  }
  Eigen::Index row = 0;
  for (int i = 0; i < view_.clusters(); ++i)
    for (int j = 0; j < view_.cluster_sizes[static_cast<std::size_t>(i)]; ++j, ++row)
      if (view_.cluster_of_row[static_cast<std::size_t>(row)] != i)
        throw std::invalid_argument(
            "logit chain: rows must be grouped by cluster");
  kappa_ = y_.array() - 0.5;
  b_of_row_.resize(view_.rows());
  Eigen::Index r0 = 0;
  for (int i = 0; i < view_.clusters(); ++i) {
    const int n_i = view_.cluster_sizes[static_cast<std::size_t>(i)];
    b_of_row_.segment(r0, n_i).setConstant(state_.b(i));
    r0 += n_i;
  }
  refresh_linpred();
  refresh_weighted_sums();
}

void Chain::refresh_linpred() { linpred_ = view_.x * state_.coef.beta; }

void Chain::refresh_weighted_sums() {
  s_omega_xx_.resize(view_.cols());
  for (Eigen::Index k = 0; k < view_.cols(); ++k)
    s_omega_xx_(k) =
        view_.x.col(k).array().square().matrix().dot(state_.omega);
}

void Chain::update_omega(RngStream& rng) {
  for (Eigen::Index r = 0; r < view_.rows(); ++r) {
    const double eta = linpred_(r) + b_of_row_(r);
    state_.omega(r) = random::sample_pg(rng, {1.0, eta});
  }
  refresh_weighted_sums();
}

double Chain::beta_score(int k) const {
  // sum_ij omega x_k (z - sum_{l != k} x_l beta_l) with
  // z = (y - 1/2)/omega - b, computed without dividing by omega:
  // omega * zeta = (y - 1/2) - omega (b + linpred - x_k beta_k).
  double s = 0.0;
  const auto& xk = view_.x.col(k);
  for (Eigen::Index r = 0; r < view_.rows(); ++r)
    s += xk(r) * (kappa_(r) - state_.omega(r) * (b_of_row_(r) + linpred_(r)));
  return s + state_.coef.beta(k) * s_omega_xx_(k);
}

double Chain::spike_probability(int k) const {
  const double precision = s_omega_xx_(k);
  if (!(precision > 0.0))
    throw std::runtime_error("logit: degenerate weighted design column");
  const double m = beta_score(k) / precision;
  const double log_w1 = std::log1p(-state_.coef.w) +
                        log_normal_pdf(0.0, m, 1.0 / precision);
  const double log_w2 =
      std::log(state_.coef.w) +
      log_normal_pdf(state_.coef.mu0, m,
                     state_.coef.sigma0_sq + 1.0 / precision);
  return sigmoid(log_w1 - log_w2);
}

void Chain::update_beta_coord(int k, RngStream& rng) {
  const double precision = s_omega_xx_(k);
  const double score = beta_score(k);
  const auto draw = spikeslab::draw_spike_slab_coord(
      precision, score, state_.coef.w, state_.coef.mu0, state_.coef.sigma0_sq,
      view_.policies[static_cast<std::size_t>(k)], config_.slab_var_inflation,
      rng);
  const double delta = draw.beta - state_.coef.beta(k);
  if (delta != 0.0) linpred_.noalias() += delta * view_.x.col(k);
  state_.coef.beta(k) = draw.beta;
  state_.coef.included[static_cast<std::size_t>(k)] = draw.included ? 1 : 0;
}

void Chain::update_random_effects(RngStream& rng) {
  Eigen::Index row0 = 0;
  for (int i = 0; i < view_.clusters(); ++i) {
    const int n_i = view_.cluster_sizes[static_cast<std::size_t>(i)];
    double omega_sum = 0.0;
    double weighted = 0.0;  // sum_j omega u = sum_j (y - 1/2) - omega linpred
    for (Eigen::Index r = row0; r < row0 + n_i; ++r) {
      omega_sum += state_.omega(r);
      weighted += kappa_(r) - state_.omega(r) * linpred_(r);
    }
    const double var = 1.0 / (1.0 / state_.sigma_b_sq + omega_sum);
    const double b_new = random::draw_normal(rng, var * weighted, var);
    b_of_row_.segment(row0, n_i).setConstant(b_new);
    state_.b(i) = b_new;
    row0 += n_i;
  }
}

void Chain::impute_missing_y(RngStream& rng) {
  for (Eigen::Index r = 0; r < view_.rows(); ++r) {
    if (!view_.y_missing[static_cast<std::size_t>(r)]) continue;
    const double p = sigmoid(linpred_(r) + b_of_row_(r));
    const double v = random::draw_bernoulli(rng, p);
    y_(r) = v;
    kappa_(r) = v - 0.5;
  }
}

void Chain::cycle(RngStream& rng) {
  refresh_linpred();  // shed incremental rounding each cycle
  update_omega(rng);
  for (int k : spikeslab::scan_indices(static_cast<int>(view_.cols()),
                                       config_.scan, rng))
    update_beta_coord(k, rng);
  state_.coef.w = spikeslab::update_w(state_.coef, view_.policies, hyper_, rng);
  state_.coef.mu0 = spikeslab::update_mu0(state_.coef, rng);
  state_.coef.sigma0_sq = spikeslab::update_sigma0_sq(state_.coef, rng);
  update_random_effects(rng);
  state_.sigma_b_sq = spikeslab::update_sigma_b_sq(state_.b, hyper_.nu_b, rng);
  impute_missing_y(rng);
}

ChainResult run_chain(const RegressionView& view, const Hyper& hyper,
                      const ChainConfig& config, int n_cycles, RngStream& rng,
                      std::optional<LogitState> init) {
  if (n_cycles < 1) throw std::invalid_argument("run_chain: n_cycles >= 1");
  LogitState state = init ? std::move(*init)
                          : make_initial_state(view, hyper, rng);
  Chain chain(view, hyper, config, std::move(state));
  ChainResult result;
  if (config.record_trace) result.trace.reserve(static_cast<std::size_t>(n_cycles));
  for (int c = 0; c < n_cycles; ++c) {
    chain.cycle(rng);
    if (config.record_trace) result.trace.push_back(chain.state());
  }
  result.final_state = chain.state();
  result.final_y = chain.y();
  for (Eigen::Index r = 0; r < result.final_y.size(); ++r)
    if (view.y_missing[static_cast<std::size_t>(r)])
      result.imputed.push_back(result.final_y(r));
  return result;
}

}  // namespace sshrimp::logit
