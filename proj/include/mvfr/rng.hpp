#pragma once
#include <Eigen/Dense>
#include <cstdint>

namespace mvfr {

// Counter-based generation (Philox2x64-10 block function). A stream is addressed
// by (master seed, label); the same address yields the same draw sequence no
// matter which thread runs it or in what order streams are created, which is what
// makes the data-parallel sweeps reproducible for any thread count.

enum class Rv : std::uint32_t {
  Init = 1,
  LoadingsRow,
  ResponseCoefs,
  IdioVar,
  ResponseVar,
  Factor,
  Membership,
  MembershipSpecific,
  ResponseBit,
  Stick,
  StickSpecific,
  Xi,
  SlabVar,
  SlabVarSpecific,
  ResponseSlabVar,
  Adapt,
  Impute,
  SimParams,
  SimData,
  Predict,
  Test,
  PriorState,
  PriorData,
};

struct StreamLabel {
  Rv kind = Rv::Test;
  std::int32_t view = 0;   // 0-based view, -1 = response/global
  std::int64_t unit = 0;   // row / column / subject, as the site needs
  std::int64_t step = 0;   // iteration or replicate
};

class RngStream {
 public:
  RngStream(std::uint64_t master_seed, StreamLabel label);

  std::uint64_t next_u64();
  double uniform();  // strictly inside (0,1)
  double normal();
  Eigen::VectorXd normal_vector(Eigen::Index n);
  // gamma with mean shape/rate; inverse_gamma has density ∝ x^{-shape-1} e^{-rate/x}
  double gamma(double shape, double rate);
  double inverse_gamma(double shape, double rate);
  double beta(double a, double b);
  int bernoulli(double p);
  int bernoulli_logit(double log_odds);
  // index into log_weights (0-based), normalized by log-sum-exp internally
  int categorical_log(const Eigen::VectorXd& log_weights);

 private:
  void refill();

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::uint64_t buf_[2] = {0, 0};
  int buf_pos_ = 2;
  bool have_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

// Draws from N(P⁻¹u, P⁻¹) given the precision P, via one Cholesky factorization
// and no explicit inverse. The factored form is reusable across right-hand sides
// (the factor-update precision is shared by all subjects).
class PrecisionSolver {
 public:
  explicit PrecisionSolver(const Eigen::MatrixXd& precision);  // throws NumericalError if not SPD

  Eigen::VectorXd mean(const Eigen::VectorXd& linear_term) const;
  Eigen::VectorXd draw(RngStream& rng, const Eigen::VectorXd& linear_term) const;
  Eigen::MatrixXd covariance() const;  // dense inverse; for moments/prediction, not the hot path
  Eigen::Index dim() const { return llt_.matrixLLT().rows(); }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

Eigen::VectorXd draw_mvn_from_precision(RngStream& rng, const Eigen::MatrixXd& precision,
                                        const Eigen::VectorXd& linear_term);

}  // namespace mvfr
