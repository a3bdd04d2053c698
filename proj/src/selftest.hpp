#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sshrimp::selftest {

struct Check {
  std::string name;
  double statistic = 0.0;  // |z| or KS D, depending on the check
  double bound = 0.0;
  bool pass = false;
};

struct Report {
  std::string title;
  std::vector<Check> checks;

  bool passed() const;
  std::string text() const;
};

struct Options {
  std::uint64_t seed = 20240915;
  bool quick = false;         // reduced sample sizes
  bool inject_fault = false;  // perturb the slab variance in both samplers;
                              // the Geweke tests must then fail
};

// Moment identities of the exact PG(1, c) sampler for c in {0, .5, 1, 2, 4}
// (|z| < 4 against tanh(c/2)/(2c)), plus two-sample Kolmogorov-Smirnov
// against the truncated-series oracle at c in {0, 2}, level 0.001.
Report pg_suite(const Options& options);

// Joint-distribution (Geweke) tests: prior-predictive simulation against
// successive-conditional simulation on a 2-cluster, 3-obs, 2-coefficient toy
// problem with every response treated as missing. First and second moments
// of bounded transforms of each monitored scalar must agree within |z| < 4.
// With the paper's hyperpriors the raw scalars have no finite moments, so
// each one is monitored through tanh(x/kappa); both simulators target the
// same joint, so agreement of the transformed moments is an equally sharp
// certificate.
Report geweke_lme(const Options& options);
Report geweke_logit(const Options& options);

std::vector<Report> run_all(const Options& options);

// Two-sample KS statistic and the large-sample critical value at `alpha`.
double ks_statistic(std::vector<double> a, std::vector<double> b);
double ks_critical(double alpha, std::size_t n, std::size_t m);

}  // namespace sshrimp::selftest
