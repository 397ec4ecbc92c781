#pragma once

#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

namespace netcausal {

// Exponential tilt of a base measure mu on [-1,1]:
//   alpha(l1, l2)  = log Int exp(l1 x + l2 x^2 / 2) dmu(x)
//   alpha_prime    = d alpha / d l1   (mean of the tilted measure, in [-1,1])
//   alpha_second   = d^2 alpha / d l1^2 (variance of the tilted measure, in (0,1])
// l2 >= 0 is admitted; the pseudo-likelihood and mean-field paths use l2 = 0.
struct TiltParams {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
};

// Probability measure on [-1,1] represented by atoms (x_i, w_i): either a
// genuinely discrete measure or a quadrature rule standing in for a density.
// Invariants enforced at construction: support within [-1,1], positive
// weights summing to 1, at least two distinct locations.
class BaseMeasure {
 public:
  enum class Kind { discrete, quadrature };

  static BaseMeasure discrete(std::vector<double> locations,
                              std::vector<double> weights);
  // Two atoms at +-1 with weight 1/2 each.
  static BaseMeasure rademacher();
  // Gauss-Legendre rule for the uniform density on [-1,1]; exact for
  // polynomial integrands up to degree 2*nodes-1, spectrally accurate for
  // the analytic tilt integrands.
  static BaseMeasure uniform(int nodes = 64);
  static BaseMeasure preset(const std::string& name);

  static BaseMeasure from_json(const std::string& text);
  std::string to_json() const;

  Kind kind() const { return kind_; }
  int size() const { return static_cast<int>(x_.size()); }
  const std::vector<double>& locations() const { return x_; }
  const std::vector<double>& weights() const { return w_; }
  bool symmetric() const;

  double alpha(TiltParams lam) const;
  double alpha_prime(TiltParams lam) const;
  double alpha_second(TiltParams lam) const;

  // Vectorized over lambda1 with shared lambda2 (the hot path in the
  // iterative algorithms).
  Eigen::VectorXd alpha_prime(const Eigen::VectorXd& lambda1,
                              double lambda2) const;
  Eigen::VectorXd alpha_second(const Eigen::VectorXd& lambda1,
                               double lambda2) const;

  // Draw from the tilted measure by inverse CDF over the atoms; consumes
  // exactly one uniform variate.
  double sample_tilted(TiltParams lam, std::mt19937_64& rng) const;

 private:
  BaseMeasure(Kind kind, std::vector<double> x, std::vector<double> w);
  // Tilted atom masses p_i scaled by exp(-max_exponent); returns their sum.
  double tilted_masses(TiltParams lam, std::vector<double>& scratch) const;
  // Sum p_i * x_i pairing each index with its mirror so symmetric rules
  // cancel exactly under even tilts.
  double mirrored_moment(const std::vector<double>& p) const;

  Kind kind_;
  std::vector<double> x_;
  std::vector<double> w_;
  bool two_point_sym_;  // atoms exactly {+1,-1} with weight 1/2: closed forms
};

}  // namespace netcausal
