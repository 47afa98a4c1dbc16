#include "mvfr/rng.hpp"

#include <cmath>
#include <numbers>

#include "mvfr/errors.hpp"

namespace mvfr {

namespace {

constexpr std::uint64_t kPhiloxMul = 0xD2B74407B1CE6E93ULL;
constexpr std::uint64_t kWeyl = 0x9E3779B97F4A7C15ULL;

inline void philox_round(std::uint64_t& x0, std::uint64_t& x1, std::uint64_t& k) {
  const unsigned __int128 prod = static_cast<unsigned __int128>(kPhiloxMul) * x0;
  const std::uint64_t hi = static_cast<std::uint64_t>(prod >> 64);
  const std::uint64_t lo = static_cast<std::uint64_t>(prod);
  x0 = hi ^ k ^ x1;
  x1 = lo;
  k += kWeyl;
}

// splitmix64 finalizer; used to fold the label fields into the stream key
inline std::uint64_t mix64(std::uint64_t z) {
  z += kWeyl;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t master_seed, StreamLabel label) {
  std::uint64_t k = mix64(master_seed);
  k = mix64(k ^ static_cast<std::uint64_t>(label.kind));
  k = mix64(k ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(label.view)));
  k = mix64(k ^ static_cast<std::uint64_t>(label.unit));
  k = mix64(k ^ static_cast<std::uint64_t>(label.step));
  key_ = k;
}

void RngStream::refill() {
  std::uint64_t x0 = counter_++;
  std::uint64_t x1 = 0;
  std::uint64_t k = key_;
  for (int r = 0; r < 10; ++r) philox_round(x0, x1, k);
  buf_[0] = x0;
  buf_[1] = x1;
  buf_pos_ = 0;
}

std::uint64_t RngStream::next_u64() {
  if (buf_pos_ > 1) refill();
  return buf_[buf_pos_++];
}

double RngStream::uniform() {
  // 53 random bits, offset by half a ulp so the result is strictly inside (0,1)
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  if (have_cached_normal_) {
    have_cached_normal_ = false;
    return cached_normal_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  cached_normal_ = r * std::sin(a);
  have_cached_normal_ = true;
  return r * std::cos(a);
}

Eigen::VectorXd RngStream::normal_vector(Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
  return v;
}

double RngStream::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw ConfigError("gamma draw: shape and rate must be > 0");
  if (shape < 1.0) {
    // boost a Ga(shape+1) draw down; standard augmentation for shape < 1
    const double u = uniform();
    return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
  }
}

double RngStream::inverse_gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw ConfigError("inverse_gamma draw: shape and rate must be > 0");
  return rate / gamma(shape, 1.0);
}

double RngStream::beta(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw ConfigError("beta draw: parameters must be > 0");
  const double ga = gamma(a, 1.0);
  const double gb = gamma(b, 1.0);
  return ga / (ga + gb);
}

int RngStream::bernoulli(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("bernoulli draw: p must be in [0,1]");
  return uniform() < p ? 1 : 0;
}

int RngStream::bernoulli_logit(double log_odds) {
  if (std::isnan(log_odds)) throw NumericalError("bernoulli_logit: NaN log-odds");
  const double p = 1.0 / (1.0 + std::exp(-log_odds));
  return uniform() < p ? 1 : 0;
}

int RngStream::categorical_log(const Eigen::VectorXd& log_weights) {
  const Eigen::Index n = log_weights.size();
  if (n == 0) throw ConfigError("categorical draw: empty weight vector");
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::isnan(log_weights[i])) throw NumericalError("categorical draw: NaN log-weight");
    mx = std::max(mx, log_weights[i]);
  }
  if (!std::isfinite(mx))
    throw NumericalError("categorical draw: all log-weights are -inf");
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) total += std::exp(log_weights[i] - mx);
  const double target = uniform() * total;
  double cum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    cum += std::exp(log_weights[i] - mx);
    if (target <= cum) return static_cast<int>(i);
  }
  return static_cast<int>(n - 1);  // guard against roundoff on the last bin
}

PrecisionSolver::PrecisionSolver(const Eigen::MatrixXd& precision) : llt_(precision) {
  if (llt_.info() != Eigen::Success) {
    const double min_pivot = llt_.matrixLLT().diagonal().minCoeff();
    throw NumericalError("precision matrix is not positive definite (min pivot " +
                         std::to_string(min_pivot) + ", dim " +
                         std::to_string(precision.rows()) + ")");
  }
}

Eigen::VectorXd PrecisionSolver::mean(const Eigen::VectorXd& linear_term) const {
  return llt_.solve(linear_term);
}

Eigen::VectorXd PrecisionSolver::draw(RngStream& rng, const Eigen::VectorXd& linear_term) const {
  // mean + L⁻ᵀ z has covariance (L Lᵀ)⁻¹ = P⁻¹
  Eigen::VectorXd z = rng.normal_vector(dim());
  llt_.matrixU().solveInPlace(z);
  return llt_.solve(linear_term) + z;
}

Eigen::MatrixXd PrecisionSolver::covariance() const {
  return llt_.solve(Eigen::MatrixXd::Identity(dim(), dim()));
}

Eigen::VectorXd draw_mvn_from_precision(RngStream& rng, const Eigen::MatrixXd& precision,
                                        const Eigen::VectorXd& linear_term) {
  return PrecisionSolver(precision).draw(rng, linear_term);
}

}  // namespace mvfr
