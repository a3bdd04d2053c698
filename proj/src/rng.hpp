#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace sshrimp::random {

// Seeded random stream with hash-derived substreams.
//
// The engine is xoshiro256++ seeded through splitmix64 from a hash of
// (seed, path). Substreams obtained via child() extend the path, so any
// (seed, path) pair maps to one fixed draw sequence regardless of how many
// sibling streams exist or in which order they are consumed. Integer output
// is bit-reproducible across platforms; floating-point draws additionally
// depend on the platform's libm.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);
  RngStream(std::uint64_t seed, std::span<const std::uint64_t> path);

  // Derived stream for path element `id`; independent of this stream's
  // consumption state.
  RngStream child(std::uint64_t id) const;

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on (0, 1); safe as a log/denominator argument.
  double uniform_pos();

  std::uint64_t seed() const { return seed_; }
  const std::vector<std::uint64_t>& path() const { return path_; }

 private:
  RngStream(std::uint64_t seed, std::vector<std::uint64_t> path,
            std::uint64_t base);

  std::uint64_t seed_ = 0;
  std::vector<std::uint64_t> path_;
  std::uint64_t base_ = 0;  // hash of (seed, path); engine derives from it
  std::uint64_t s_[4] = {0, 0, 0, 0};
};

// ---------------------------------------------------------------------------
// Standard distributions. Parameters are validated; violations throw
// std::invalid_argument.

double draw_std_normal(RngStream& rng);
// `var` is a variance, not a standard deviation. var == 0 returns `mean`.
double draw_normal(RngStream& rng, double mean, double var);
double draw_exponential(RngStream& rng);  // rate 1
double draw_gamma(RngStream& rng, double shape);  // Gamma(shape, 1)
double draw_chi_square(RngStream& rng, double df);
double draw_beta(RngStream& rng, double a, double b);
double draw_inverse_gamma(RngStream& rng, double shape, double scale);
int draw_bernoulli(RngStream& rng, double p);
int draw_binomial(RngStream& rng, int n, double p);

// Scaled inverse chi-square in the Gelman convention:
// draw = df * scale / X with X ~ chi^2_df.
double draw_scaled_inv_chisq(RngStream& rng, double df, double scale);

// ---------------------------------------------------------------------------
// Polya-Gamma.

struct PGParams {
  double b = 1.0;  // shape; only b == 1 is supported by sample_pg
  double c = 0.0;  // tilt
};

// Exact PG(1, c) draw via the alternating-series accept-reject sampler:
// proposals are a truncated inverse-Gaussian left of the crossover point
// t = 0.64 and a tilted exponential right of it. No truncation bias.
double sample_pg(RngStream& rng, const PGParams& params);

// Truncated-series evaluation of the PG(b, c) definition,
//   X = (1 / 2 pi^2) * sum_{k=1..truncation} g_k / ((k - 1/2)^2 + c^2/(4 pi^2)),
// with g_k ~ Gamma(b, 1). Test oracle only; never used inside samplers.
double pg_series_oracle(RngStream& rng, const PGParams& params, int truncation);

// Deterministic kernel of the series above for given gamma variates.
double pg_series_value(std::span<const double> gammas, double c);

}  // namespace sshrimp::random
