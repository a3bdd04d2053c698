#include "selftest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "lme_sampler.hpp"
#include "logit_sampler.hpp"
#include "mathutil.hpp"
#include "rng.hpp"
#include "spike_slab.hpp"

namespace sshrimp::selftest {

using data::Policy;
using data::RegressionView;
using random::RngStream;
using spikeslab::Hyper;

bool Report::passed() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

std::string Report::text() const {
  std::string out = "== " + title + " ==\n";
  char buf[160];
  for (const auto& c : checks) {
    std::snprintf(buf, sizeof buf, "  %-34s stat %8.3f  bound %6.3f  %s\n",
                  c.name.c_str(), c.statistic, c.bound,
                  c.pass ? "pass" : "FAIL");
    out += buf;
  }
  out += passed() ? "-- pass\n" : "-- FAIL\n";
  return out;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double d = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j])
      ++i;
    else
      ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na -
                              static_cast<double>(j) / nb));
  }
  return d;
}

double ks_critical(double alpha, std::size_t n, std::size_t m) {
  const double c = std::sqrt(-std::log(alpha / 2.0) / 2.0);
  return c * std::sqrt(static_cast<double>(n + m) /
                       (static_cast<double>(n) * static_cast<double>(m)));
}

namespace {

// Streaming batch-means accumulator for one scalar. The batch-mean standard
// error stays honest under the autocorrelation of the successive-conditional
// chain and reduces to sd/sqrt(n) for independent draws.
class BatchSeries {
 public:
  BatchSeries(std::size_t total, std::size_t batches)
      : batch_size_(total / batches) {}

  void add(double v) {
    sum_ += v;
    ++n_;
    batch_sum_ += v;
    if (++batch_fill_ == batch_size_) {
      batch_means_.push_back(batch_sum_ / static_cast<double>(batch_size_));
      batch_sum_ = 0.0;
      batch_fill_ = 0;
    }
  }

  double mean() const { return sum_ / static_cast<double>(n_); }

  double se() const {
    const auto b = static_cast<double>(batch_means_.size());
    const double m = mean();
    double v = 0.0;
    for (double x : batch_means_) v += (x - m) * (x - m);
    v /= (b - 1.0);
    return std::sqrt(v / b);
  }

 private:
  std::size_t batch_size_;
  double sum_ = 0.0;
  std::size_t n_ = 0;
  double batch_sum_ = 0.0;
  std::size_t batch_fill_ = 0;
  std::vector<double> batch_means_;
};

class MomentSet {
 public:
  MomentSet(std::vector<std::string> names, std::size_t total,
            std::size_t batches)
      : names_(std::move(names)) {
    series_.assign(names_.size(), BatchSeries(total, batches));
  }

  void add(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) series_[i].add(values[i]);
  }

  const std::vector<std::string>& names() const { return names_; }
  double mean(std::size_t i) const { return series_[i].mean(); }
  double se(std::size_t i) const { return series_[i].se(); }

 private:
  std::vector<std::string> names_;
  std::vector<BatchSeries> series_;
};

void add_moment_checks(Report& report, const MomentSet& a, const MomentSet& b,
                       double bound) {
  for (std::size_t i = 0; i < a.names().size(); ++i) {
    const double se =
        std::sqrt(a.se(i) * a.se(i) + b.se(i) * b.se(i));
    const double z = (a.mean(i) - b.mean(i)) / se;
    report.checks.push_back(
        {a.names()[i], std::fabs(z), bound, std::fabs(z) < bound});
  }
}

// ---------------------------------------------------------------------------
// Toy problem: 2 clusters x 3 observations, intercept (forced) plus one
// undetermined covariate, every response masked.

RegressionView make_toy_view(data::Scale scale) {
  RegressionView view;
  view.target = 0;
  view.has_intercept = true;
  view.target_scale = scale;
  const double x1[6] = {0.5, -1.0, 0.25, -0.5, 1.0, -0.25};
  view.x.resize(6, 2);
  for (int r = 0; r < 6; ++r) {
    view.x(r, 0) = 1.0;
    view.x(r, 1) = x1[r];
  }
  view.y = Eigen::VectorXd::Zero(6);
  view.y_missing.assign(6, 1);
  view.cluster_of_row = {0, 0, 0, 1, 1, 1};
  view.cluster_sizes = {3, 3};
  view.policies = {Policy::Forced, Policy::Undetermined};
  return view;
}

struct PriorDraw {
  spikeslab::SpikeSlabState coef;
  Eigen::VectorXd b;
  double sigma_b_sq = 1.0;
  double sigma_e_sq = 1.0;
};

PriorDraw draw_prior(const RegressionView& view, const Hyper& hyper,
                     RngStream& rng) {
  PriorDraw draw;
  draw.coef.w = random::draw_beta(rng, hyper.a_w, hyper.b_w);
  draw.coef.mu0 = random::draw_normal(rng, 0.0, 1.0);
  draw.coef.sigma0_sq = random::draw_inverse_gamma(rng, 1.0, 1.0);
  const int p = static_cast<int>(view.cols());
  draw.coef.beta = Eigen::VectorXd::Zero(p);
  draw.coef.included.assign(static_cast<std::size_t>(p), 0);
  for (int k = 0; k < p; ++k) {
    const bool slab =
        view.policies[static_cast<std::size_t>(k)] == Policy::Forced ||
        random::draw_bernoulli(rng, draw.coef.w) == 1;
    if (slab) {
      draw.coef.beta(k) =
          random::draw_normal(rng, draw.coef.mu0, draw.coef.sigma0_sq);
      draw.coef.included[static_cast<std::size_t>(k)] = 1;
    }
  }
  // sigma_b^2 ~ nu_b / chi^2_{nu_b}; sigma_e^2 ~ 1 / chi^2_{nu_e}. These are
  // the prior readings whose conditionals carry the numerators
  // nu_b + sum b^2 and 1 + sum resid^2.
  draw.sigma_b_sq = random::draw_scaled_inv_chisq(rng, hyper.nu_b, 1.0);
  draw.sigma_e_sq =
      random::draw_scaled_inv_chisq(rng, hyper.nu_e, 1.0 / hyper.nu_e);
  draw.b = Eigen::VectorXd::Zero(view.clusters());
  for (int i = 0; i < view.clusters(); ++i)
    draw.b(i) = random::draw_normal(rng, 0.0, draw.sigma_b_sq);
  return draw;
}

Eigen::VectorXd draw_lme_y(const RegressionView& view, const PriorDraw& draw,
                           RngStream& rng) {
  Eigen::VectorXd y = view.x * draw.coef.beta;
  for (Eigen::Index r = 0; r < y.size(); ++r)
    y(r) += draw.b(view.cluster_of_row[static_cast<std::size_t>(r)]) +
            random::draw_normal(rng, 0.0, draw.sigma_e_sq);
  return y;
}

Eigen::VectorXd draw_logit_y(const RegressionView& view, const PriorDraw& draw,
                             RngStream& rng) {
  Eigen::VectorXd y(view.rows());
  const Eigen::VectorXd eta = view.x * draw.coef.beta;
  for (Eigen::Index r = 0; r < y.size(); ++r) {
    const double p = sigmoid(
        eta(r) + draw.b(view.cluster_of_row[static_cast<std::size_t>(r)]));
    y(r) = random::draw_bernoulli(rng, p);
  }
  return y;
}

double sq(double x) { return x * x; }

// Bounded transforms of the monitored scalars; identical code runs on both
// simulation sides.
std::vector<std::string> lme_stat_names() {
  return {"t(beta0)",   "t(beta0)^2",  "t(beta1)",    "t(beta1)^2",
          "t(b1)",      "t(b1)^2",     "t(b2)",       "t(b2)^2",
          "t(sig_b2)",  "t(sig_b2)^2", "t(sig_e2)",   "t(sig_e2)^2",
          "t(mu0)",     "t(mu0)^2",    "t(sig02)",    "t(sig02)^2",
          "w",          "w^2",         "incl(beta1)", "t(y1)",
          "t(y1)^2",    "t(y4)",       "t(y4)^2",     "t(ymean)",
          "t(beta0)t(y1)"};
}

std::vector<double> lme_stats(const spikeslab::SpikeSlabState& coef,
                              const Eigen::VectorXd& b, double sigma_b_sq,
                              double sigma_e_sq, const Eigen::VectorXd& y) {
  const double tb0 = std::tanh(coef.beta(0) / 2.0);
  const double tb1 = std::tanh(coef.beta(1) / 2.0);
  const double tr1 = std::tanh(b(0) / 2.0);
  const double tr2 = std::tanh(b(1) / 2.0);
  const double tsb = std::tanh(sigma_b_sq / 4.0);
  const double tse = std::tanh(sigma_e_sq / 4.0);
  const double tm0 = std::tanh(coef.mu0 / 2.0);
  const double ts0 = std::tanh(coef.sigma0_sq / 4.0);
  const double ty1 = std::tanh(y(0) / 4.0);
  const double ty4 = std::tanh(y(3) / 4.0);
  const double tym = std::tanh(y.mean() / 4.0);
  return {tb0,      sq(tb0), tb1, sq(tb1), tr1,
          sq(tr1),  tr2,     sq(tr2), tsb, sq(tsb),
          tse,      sq(tse), tm0, sq(tm0), ts0,
          sq(ts0),  coef.w,  sq(coef.w),
          static_cast<double>(coef.included[1]),
          ty1,      sq(ty1), ty4, sq(ty4), tym,
          tb0 * ty1};
}

std::vector<std::string> logit_stat_names() {
  return {"t(beta0)",  "t(beta0)^2",  "t(beta1)", "t(beta1)^2",
          "t(b1)",     "t(b1)^2",     "t(b2)",    "t(b2)^2",
          "t(sig_b2)", "t(sig_b2)^2", "t(mu0)",   "t(mu0)^2",
          "t(sig02)",  "t(sig02)^2",  "w",        "w^2",
          "incl(beta1)", "y1",        "ymean",    "t(beta0)y1"};
}

std::vector<double> logit_stats(const spikeslab::SpikeSlabState& coef,
                                const Eigen::VectorXd& b, double sigma_b_sq,
                                const Eigen::VectorXd& y) {
  const double tb0 = std::tanh(coef.beta(0) / 2.0);
  const double tb1 = std::tanh(coef.beta(1) / 2.0);
  const double tr1 = std::tanh(b(0) / 2.0);
  const double tr2 = std::tanh(b(1) / 2.0);
  const double tsb = std::tanh(sigma_b_sq / 4.0);
  const double tm0 = std::tanh(coef.mu0 / 2.0);
  const double ts0 = std::tanh(coef.sigma0_sq / 4.0);
  return {tb0, sq(tb0), tb1, sq(tb1), tr1, sq(tr1), tr2, sq(tr2),
          tsb, sq(tsb), tm0, sq(tm0), ts0, sq(ts0), coef.w, sq(coef.w),
          static_cast<double>(coef.included[1]), y(0), y.mean(),
          tb0 * y(0)};
}

}  // namespace

Report pg_suite(const Options& options) {
  Report report;
  report.title = "polya-gamma sampler";
  RngStream root(options.seed);
  const std::size_t n_moment = options.quick ? 20000 : 100000;
  const std::size_t n_ks = options.quick ? 4000 : 10000;

  const double cs[] = {0.0, 0.5, 1.0, 2.0, 4.0};
  int stream = 1;
  for (double c : cs) {
    RngStream rng = root.child(static_cast<std::uint64_t>(stream++));
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < n_moment; ++i) {
      const double x = random::sample_pg(rng, {1.0, c});
      sum += x;
      sum_sq += x * x;
    }
    const double n = static_cast<double>(n_moment);
    const double mean = sum / n;
    const double sd = std::sqrt((sum_sq - n * mean * mean) / (n - 1.0));
    const double target = c == 0.0 ? 0.25 : std::tanh(c / 2.0) / (2.0 * c);
    const double z = (mean - target) / (sd / std::sqrt(n));
    char name[48];
    std::snprintf(name, sizeof name, "mean PG(1,%.1f)", c);
    report.checks.push_back({name, std::fabs(z), 4.0, std::fabs(z) < 4.0});
  }

  for (double c : {0.0, 2.0}) {
    RngStream rng = root.child(static_cast<std::uint64_t>(stream++));
    std::vector<double> a(n_ks);
    std::vector<double> b(n_ks);
    for (auto& v : a) v = random::sample_pg(rng, {1.0, c});
    for (auto& v : b) v = random::pg_series_oracle(rng, {1.0, c}, 500);
    const double d = ks_statistic(std::move(a), std::move(b));
    const double crit = ks_critical(0.001, n_ks, n_ks);
    char name[48];
    std::snprintf(name, sizeof name, "KS vs series oracle c=%.0f", c);
    report.checks.push_back({name, d, crit, d < crit});
  }
  return report;
}

Report geweke_lme(const Options& options) {
  Report report;
  report.title = "geweke joint test: linear sampler";
  const std::size_t n_kept = options.quick ? 2000 : 10000;
  const int thin = options.quick ? 5 : 10;
  const std::size_t batches = options.quick ? 50 : 100;
  const Hyper hyper;

  auto view = make_toy_view(data::Scale::Continuous);
  RngStream root(options.seed);
  MomentSet mc(lme_stat_names(), n_kept, batches);
  MomentSet sc(lme_stat_names(), n_kept, batches);

  RngStream mc_rng = root.child(1);
  for (std::size_t i = 0; i < n_kept; ++i) {
    const auto prior = draw_prior(view, hyper, mc_rng);
    const auto y = draw_lme_y(view, prior, mc_rng);
    mc.add(lme_stats(prior.coef, prior.b, prior.sigma_b_sq, prior.sigma_e_sq,
                     y));
  }

  RngStream sc_rng = root.child(2);
  const auto init = draw_prior(view, hyper, sc_rng);
  view.y = draw_lme_y(view, init, sc_rng);
  lme::LmeState state;
  state.coef = init.coef;
  state.b = init.b;
  state.sigma_b_sq = init.sigma_b_sq;
  state.sigma_e_sq = init.sigma_e_sq;
  lme::ChainConfig cfg;
  cfg.record_trace = false;
  cfg.slab_var_inflation = options.inject_fault ? 1.5 : 1.0;
  lme::Chain chain(view, hyper, cfg, std::move(state));
  for (std::size_t i = 0; i < n_kept; ++i) {
    for (int t = 0; t < thin; ++t) chain.cycle(sc_rng);
    sc.add(lme_stats(chain.state().coef, chain.state().b,
                     chain.state().sigma_b_sq, chain.state().sigma_e_sq,
                     chain.y()));
  }
  add_moment_checks(report, mc, sc, 4.0);
  return report;
}

Report geweke_logit(const Options& options) {
  Report report;
  report.title = "geweke joint test: logistic sampler";
  const std::size_t n_kept = options.quick ? 2000 : 10000;
  const int thin = options.quick ? 5 : 10;
  const std::size_t batches = options.quick ? 50 : 100;
  const Hyper hyper;

  auto view = make_toy_view(data::Scale::Binary);
  RngStream root(options.seed);
  MomentSet mc(logit_stat_names(), n_kept, batches);
  MomentSet sc(logit_stat_names(), n_kept, batches);

  RngStream mc_rng = root.child(1);
  for (std::size_t i = 0; i < n_kept; ++i) {
    const auto prior = draw_prior(view, hyper, mc_rng);
    const auto y = draw_logit_y(view, prior, mc_rng);
    mc.add(logit_stats(prior.coef, prior.b, prior.sigma_b_sq, y));
  }

  RngStream sc_rng = root.child(2);
  const auto init = draw_prior(view, hyper, sc_rng);
  view.y = draw_logit_y(view, init, sc_rng);
  logit::LogitState state;
  state.coef = init.coef;
  state.b = init.b;
  state.sigma_b_sq = init.sigma_b_sq;
  state.omega = Eigen::VectorXd::Constant(view.rows(), 0.25);
  logit::ChainConfig cfg;
  cfg.record_trace = false;
  cfg.slab_var_inflation = options.inject_fault ? 1.5 : 1.0;
  logit::Chain chain(view, hyper, cfg, std::move(state));
  for (std::size_t i = 0; i < n_kept; ++i) {
    for (int t = 0; t < thin; ++t) chain.cycle(sc_rng);
    sc.add(logit_stats(chain.state().coef, chain.state().b,
                       chain.state().sigma_b_sq, chain.y()));
  }
  add_moment_checks(report, mc, sc, 4.0);
  return report;
}

std::vector<Report> run_all(const Options& options) {
  return {pg_suite(options), geweke_lme(options), geweke_logit(options)};
}

}  // namespace sshrimp::selftest
