#include "rng.hpp"

#include <cmath>
#include <limits>

namespace sshrimp::random {

namespace {

constexpr double kPi = 3.14159265358979323846;

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Combines a parent hash with one path element. One splitmix64 finalizer
// round over the sum keeps derivation order-sensitive and well mixed.
inline std::uint64_t derive(std::uint64_t parent, std::uint64_t id) {
  std::uint64_t z = parent + 0x9E3779B97F4A7C15ULL * (id + 0x632BE59BD9B4E019ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::vector<std::uint64_t> path,
                     std::uint64_t base)
    : seed_(seed), path_(std::move(path)), base_(base) {
  std::uint64_t x = base_;
  for (auto& word : s_) word = splitmix64(x);
}

RngStream::RngStream(std::uint64_t seed)
    : RngStream(seed, {}, derive(0x8E51ECF3C95B43D5ULL, seed)) {}

RngStream::RngStream(std::uint64_t seed, std::span<const std::uint64_t> path)
    : RngStream(seed) {
  for (std::uint64_t id : path) *this = child(id);
}

RngStream RngStream::child(std::uint64_t id) const {
  std::vector<std::uint64_t> path = path_;
  path.push_back(id);
  return RngStream(seed_, std::move(path), derive(base_, id));
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_pos() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double draw_std_normal(RngStream& rng) {
  // Box-Muller; the sine partner is discarded to keep streams stateless.
  const double u1 = rng.uniform_pos();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

double draw_normal(RngStream& rng, double mean, double var) {
  require(std::isfinite(mean), "normal: mean must be finite");
  require(var >= 0.0 && std::isfinite(var), "normal: variance must be >= 0");
  if (var == 0.0) return mean;
  return mean + std::sqrt(var) * draw_std_normal(rng);
}

double draw_exponential(RngStream& rng) { return -std::log(rng.uniform_pos()); }

double draw_gamma(RngStream& rng, double shape) {
  require(shape > 0.0 && std::isfinite(shape), "gamma: shape must be > 0");
  if (shape == 1.0) return draw_exponential(rng);
  if (shape < 1.0) {
    // Boost the shape, then correct with a power of a uniform.
    const double g = draw_gamma(rng, shape + 1.0);
    return g * std::pow(rng.uniform_pos(), 1.0 / shape);
  }
  // Marsaglia-Tsang squeeze method.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / (3.0 * std::sqrt(d));
  for (;;) {
    double x;
    double v;
    do {
      x = draw_std_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform_pos();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double draw_chi_square(RngStream& rng, double df) {
  require(df > 0.0 && std::isfinite(df), "chi_square: df must be > 0");
  return 2.0 * draw_gamma(rng, 0.5 * df);
}

double draw_beta(RngStream& rng, double a, double b) {
  require(a > 0.0 && b > 0.0, "beta: parameters must be > 0");
  const double x = draw_gamma(rng, a);
  const double y = draw_gamma(rng, b);
  return x / (x + y);
}

double draw_inverse_gamma(RngStream& rng, double shape, double scale) {
  require(shape > 0.0 && scale > 0.0, "inverse_gamma: parameters must be > 0");
  return scale / draw_gamma(rng, shape);
}

int draw_bernoulli(RngStream& rng, double p) {
  require(p >= 0.0 && p <= 1.0, "bernoulli: p must lie in [0, 1]");
  return rng.uniform() < p ? 1 : 0;
}

int draw_binomial(RngStream& rng, int n, double p) {
  require(n >= 0, "binomial: n must be >= 0");
  require(p >= 0.0 && p <= 1.0, "binomial: p must lie in [0, 1]");
  int count = 0;
  for (int i = 0; i < n; ++i) count += rng.uniform() < p ? 1 : 0;
  return count;
}

double draw_scaled_inv_chisq(RngStream& rng, double df, double scale) {
  require(df > 0.0 && std::isfinite(df), "scaled_inv_chisq: df must be > 0");
  require(scale > 0.0 && std::isfinite(scale),
          "scaled_inv_chisq: scale must be > 0");
  return df * scale / draw_chi_square(rng, df);
}

// ---------------------------------------------------------------------------
// Polya-Gamma PG(1, c).
//
// PG(1, c) = J*(1, c/2) / 4 where J* is the tilted Jacobi law. The sampler
// below draws J*(1, z), z = |c|/2, by accept-reject with the crossover point
// t = 0.64 splitting the proposal into a truncated inverse-Gaussian piece on
// (0, t] and a tilted exponential piece on (t, inf), with the alternating
// partial sums of the Jacobi series deciding acceptance.

namespace {

constexpr double kPgTrunc = 0.64;
constexpr double kPgTruncRecip = 1.0 / kPgTrunc;

double log_norm_cdf(double x) {
  // Accurate in the left tail where 0.5*erfc underflows.
  if (x < -8.0) {
    // Asymptotic expansion of Mills' ratio.
    const double x2 = x * x;
    return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * kPi) +
           std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
  }
  return std::log(0.5 * std::erfc(-x / std::sqrt(2.0)));
}

// n-th coefficient of the Jacobi series, piecewise around the crossover.
double series_coef(int n, double x) {
  const double k = (n + 0.5) * kPi;
  if (x > kPgTrunc) return k * std::exp(-0.5 * k * k * x);
  if (x > 0.0) {
    const double expnt = -1.5 * (std::log(0.5 * kPi) + std::log(x)) +
                         std::log(k) - 2.0 * (n + 0.5) * (n + 0.5) / x;
    return std::exp(expnt);
  }
  return 0.0;
}

// Probability that the proposal lands in the exponential piece (x > t).
double exponential_piece_mass(double z) {
  const double t = kPgTrunc;
  const double fz = 0.125 * kPi * kPi + 0.5 * z * z;
  const double b = std::sqrt(1.0 / t) * (t * z - 1.0);
  const double a = -std::sqrt(1.0 / t) * (t * z + 1.0);
  const double x0 = std::log(fz) + fz * t;
  const double xb = x0 - z + log_norm_cdf(b);
  const double xa = x0 + z + log_norm_cdf(a);
  const double qdivp = 4.0 / kPi * (std::exp(xb) + std::exp(xa));
  return 1.0 / (1.0 + qdivp);
}

// Inverse-Gaussian(1/z, 1) truncated to (0, t].
double draw_trunc_inv_gauss(RngStream& rng, double z) {
  const double t = kPgTrunc;
  double x = t + 1.0;
  if (kPgTruncRecip > z) {
    // Mean above the truncation point: sample the stable subordinator piece
    // x^{-3/2} exp(-1/(2x)) on (0, t], then thin by the exp(-z^2 x / 2) tilt.
    double alpha = 0.0;
    while (rng.uniform() > alpha) {
      double e1 = draw_exponential(rng);
      double e2 = draw_exponential(rng);
      while (e1 * e1 > 2.0 * e2 / t) {
        e1 = draw_exponential(rng);
        e2 = draw_exponential(rng);
      }
      x = 1.0 + e1 * t;
      x = t / (x * x);
      alpha = std::exp(-0.5 * z * z * x);
    }
  } else {
    // Michael-Schucany-Haas, rejecting draws beyond t.
    const double mu = 1.0 / z;
    while (x > t) {
      double y = draw_std_normal(rng);
      y *= y;
      const double half_mu = 0.5 * mu;
      const double mu_y = mu * y;
      x = mu + half_mu * mu_y - half_mu * std::sqrt(4.0 * mu_y + mu_y * mu_y);
      if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
    }
  }
  return x;
}

double draw_jacobi_star(RngStream& rng, double z) {
  const double fz = 0.125 * kPi * kPi + 0.5 * z * z;
  const double right_mass = exponential_piece_mass(z);
  for (;;) {
    double x;
    if (rng.uniform() < right_mass) {
      x = kPgTrunc + draw_exponential(rng) / fz;
    } else {
      x = draw_trunc_inv_gauss(rng, z);
    }
    // Squeeze via alternating partial sums of the series.
    double s = series_coef(0, x);
    const double y = rng.uniform() * s;
    int n = 0;
    for (;;) {
      ++n;
      if (n % 2 == 1) {
        s -= series_coef(n, x);
        if (y <= s) return x;
      } else {
        s += series_coef(n, x);
        if (y > s) break;  // reject this proposal
      }
    }
  }
}

}  // namespace

double sample_pg(RngStream& rng, const PGParams& params) {
  require(params.b == 1.0, "sample_pg: only b == 1 is supported");
  require(std::isfinite(params.c), "sample_pg: c must be finite");
  return 0.25 * draw_jacobi_star(rng, 0.5 * std::fabs(params.c));
}

double pg_series_value(std::span<const double> gammas, double c) {
  const double shift = c * c / (4.0 * kPi * kPi);
  double sum = 0.0;
  for (std::size_t k = gammas.size(); k-- > 0;) {
    const double idx = static_cast<double>(k) + 0.5;
    sum += gammas[k] / (idx * idx + shift);
  }
  return sum / (2.0 * kPi * kPi);
}

double pg_series_oracle(RngStream& rng, const PGParams& params,
                        int truncation) {
  require(params.b > 0.0 && std::isfinite(params.b),
          "pg_series_oracle: b must be > 0");
  require(std::isfinite(params.c), "pg_series_oracle: c must be finite");
  require(truncation >= 1, "pg_series_oracle: truncation must be >= 1");
  std::vector<double> gammas(static_cast<std::size_t>(truncation));
  for (auto& g : gammas) g = draw_gamma(rng, params.b);
  return pg_series_value(gammas, params.c);
}

}  // namespace sshrimp::random
