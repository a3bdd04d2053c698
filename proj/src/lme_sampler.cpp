#include "lme_sampler.hpp"

#include <cmath>
#include <stdexcept>

#include "mathutil.hpp"

namespace sshrimp::lme {

LmeState make_initial_state(const RegressionView& view, const Hyper& hyper,
                            RngStream& rng) {
  LmeState state;
  state.coef = spikeslab::make_initial_coef(view.policies, hyper, rng);
  state.b = Eigen::VectorXd::Zero(view.clusters());
  state.sigma_b_sq = 1.0;
  state.sigma_e_sq = 1.0;
  return state;
}

Chain::Chain(const RegressionView& view, const Hyper& hyper,
             const ChainConfig& config, LmeState state)
    : view_(view), hyper_(hyper), config_(config), state_(std::move(state)) {
  if (state_.coef.dim() != view_.cols())
    throw std::invalid_argument("lme chain: state/view dimension mismatch");
  if (state_.b.size() != view_.clusters())
    throw std::invalid_argument("lme chain: state has wrong cluster count");
  if (view_.rows() == 0)
    throw std::invalid_argument("lme chain: empty view");
  y_ = view_.y;
  for (Eigen::Index r = 0; r < y_.size(); ++r)
    if (std::isnan(y_(r)))
      throw std::invalid_argument(
          "lme chain: response has unfilled cells; run an initial fill first");
  Eigen::Index row = 0;
  for (int i = 0; i < view_.clusters(); ++i)
    for (int j = 0; j < view_.cluster_sizes[static_cast<std::size_t>(i)]; ++j, ++row)
      if (view_.cluster_of_row[static_cast<std::size_t>(row)] != i)
        throw std::invalid_argument("lme chain: rows must be grouped by cluster");
  sxx_.resize(view_.cols());
  for (Eigen::Index k = 0; k < view_.cols(); ++k)
    sxx_(k) = view_.x.col(k).squaredNorm();
  b_of_row_.resize(view_.rows());
  refresh_residuals();
}

void Chain::refresh_residuals() {
  for (Eigen::Index r = 0; r < view_.rows(); ++r)
    b_of_row_(r) = state_.b(view_.cluster_of_row[static_cast<std::size_t>(r)]);
  resid_ = y_ - view_.x * state_.coef.beta - b_of_row_;
}

double Chain::spike_probability(int k) const {
  const double precision = sxx_(k) / state_.sigma_e_sq;
  const double score =
      (view_.x.col(k).dot(resid_) + sxx_(k) * state_.coef.beta(k)) /
      state_.sigma_e_sq;
  if (!(precision > 0.0))
    throw std::runtime_error("lme: all-zero covariate column");
  const double m = score / precision;
  const double log_w1 = std::log1p(-state_.coef.w) +
                        log_normal_pdf(0.0, m, 1.0 / precision);
  const double log_w2 =
      std::log(state_.coef.w) +
      log_normal_pdf(state_.coef.mu0, m,
                     state_.coef.sigma0_sq + 1.0 / precision);
  return sigmoid(log_w1 - log_w2);
}

void Chain::update_beta_coord(int k, RngStream& rng) {
  const double precision = sxx_(k) / state_.sigma_e_sq;
  // Partial residual score: x_k' (y - sum_{l != k} x_l beta_l - b).
  const double score =
      (view_.x.col(k).dot(resid_) + sxx_(k) * state_.coef.beta(k)) /
      state_.sigma_e_sq;
  const auto draw = spikeslab::draw_spike_slab_coord(
      precision, score, state_.coef.w, state_.coef.mu0, state_.coef.sigma0_sq,
      view_.policies[static_cast<std::size_t>(k)], config_.slab_var_inflation,
      rng);
  const double delta = draw.beta - state_.coef.beta(k);
  if (delta != 0.0) resid_.noalias() -= delta * view_.x.col(k);
  state_.coef.beta(k) = draw.beta;
  state_.coef.included[static_cast<std::size_t>(k)] = draw.included ? 1 : 0;
}

void Chain::update_random_effects(RngStream& rng) {
  // Rows are grouped by cluster, so each cluster is one contiguous segment.
  Eigen::Index row0 = 0;
  for (int i = 0; i < view_.clusters(); ++i) {
    const int n_i = view_.cluster_sizes[static_cast<std::size_t>(i)];
    // sum_j (y_ij - x_ij' beta) = cluster residual sum + n_i * current b_i.
    const double s = resid_.segment(row0, n_i).sum() + n_i * state_.b(i);
    const double var =
        1.0 / (n_i / state_.sigma_e_sq + 1.0 / state_.sigma_b_sq);
    const double mean = var * s / state_.sigma_e_sq;
    const double b_new = random::draw_normal(rng, mean, var);
    resid_.segment(row0, n_i).array() += state_.b(i) - b_new;
    b_of_row_.segment(row0, n_i).setConstant(b_new);
    state_.b(i) = b_new;
    row0 += n_i;
  }
}

void Chain::update_sigma_e(RngStream& rng) {
  const auto n = static_cast<double>(view_.rows());
  if (config_.sigma_e_mode == SigmaEMode::Conjugate) {
    const double ss = resid_.squaredNorm();
    const double df = hyper_.nu_e + n;
    state_.sigma_e_sq = random::draw_scaled_inv_chisq(rng, df, (1.0 + ss) / df);
  } else {
    // Appendix-literal: residuals from the least-squares fit of (y - b) on X,
    // df nu_e + N - 1.
    const Eigen::MatrixXd xtx = view_.x.transpose() * view_.x;
    const Eigen::VectorXd beta_hat =
        xtx.ldlt().solve(view_.x.transpose() * (y_ - b_of_row_));
    const double ss = (y_ - view_.x * beta_hat).squaredNorm();
    const double df = hyper_.nu_e + n - 1.0;
    state_.sigma_e_sq = random::draw_scaled_inv_chisq(rng, df, (1.0 + ss) / df);
  }
}

void Chain::impute_missing_y(RngStream& rng) {
  const double sd = std::sqrt(state_.sigma_e_sq);
  for (Eigen::Index r = 0; r < view_.rows(); ++r) {
    if (!view_.y_missing[static_cast<std::size_t>(r)]) continue;
    const double mean = y_(r) - resid_(r);  // x' beta + b for this row
    const double eps = sd * random::draw_std_normal(rng);
    y_(r) = mean + eps;
    resid_(r) = eps;
  }
}

void Chain::cycle(RngStream& rng) {
  refresh_residuals();  // shed incremental rounding each cycle
  for (int k : spikeslab::scan_indices(static_cast<int>(view_.cols()),
                                       config_.scan, rng))
    update_beta_coord(k, rng);
  state_.coef.w = spikeslab::update_w(state_.coef, view_.policies, hyper_, rng);
  state_.coef.mu0 = spikeslab::update_mu0(state_.coef, rng);
  state_.coef.sigma0_sq = spikeslab::update_sigma0_sq(state_.coef, rng);
  update_random_effects(rng);
  update_sigma_e(rng);
  state_.sigma_b_sq = spikeslab::update_sigma_b_sq(state_.b, hyper_.nu_b, rng);
  impute_missing_y(rng);
}

ChainResult run_chain(const RegressionView& view, const Hyper& hyper,
                      const ChainConfig& config, int n_cycles, RngStream& rng,
                      std::optional<LmeState> init) {
  if (n_cycles < 1) throw std::invalid_argument("run_chain: n_cycles >= 1");
  LmeState state = init ? std::move(*init)
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

}  // namespace sshrimp::lme
