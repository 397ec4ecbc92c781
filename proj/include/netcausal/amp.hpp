#pragma once

#include <Eigen/Dense>
#include <random>

#include "netcausal/estimands.hpp"
#include "netcausal/measure.hpp"
#include "netcausal/model.hpp"

namespace netcausal {

// Which field drives the chain: the randomization draw (tau * t_bar) or the
// all-control counterfactual (-tau * 1).
enum class AllocationVariant { treated_random, all_control };

// Population fixed point of the state-evolution pair
//   q      = E[ alpha'(tau T + H + beta sqrt(q) G, beta^2 sigma2)^2 ]
//   sigma2 = E[ alpha''(tau T + H + beta sqrt(q) G, beta^2 sigma2) ]
// with H = theta' X, G standard normal, T = +-1 (treated_random) or
// T = -1 (all_control), solved on one frozen Monte Carlo sample.
struct FixedPoint {
  double q = 0.0;
  double sigma2 = 1.0;
  int iterations = 0;
  int mc_samples = 0;
  bool converged = false;
};

struct FixedPointOptions {
  int mc_samples = 1000;
  double tol = 1e-12;  // max coordinate change
  int max_iter = 1000;
  double init_q = 0.0;
  double init_sigma2 = 1.0;
};

FixedPoint solve_fixed_point(const BaseMeasure& mu, double tau,
                             const Eigen::VectorXd& theta,
                             const CovariateDist& cov, double beta,
                             AllocationVariant variant,
                             const FixedPointOptions& opt, std::mt19937_64& rng,
                             double p_alloc = 0.5);

struct AmpState {
  Eigen::VectorXd u;       // final iterate u^[M]
  Eigen::VectorXd u_prev;  // u^[M-1]
  Eigen::VectorXd m;       // site mean estimate alpha'(beta u^[M] + h, .)
  double onsager = 0.0;    // last correction coefficient d_k
  int iterations = 0;
  double tap_residual = 0.0;
};

// Iterates u^[k+1] = G alpha'(beta u^[k] + h, beta^2 sigma2)
//                    - d_k alpha'(beta u^[k-1] + h, beta^2 sigma2),
// d_k = (beta/n) sum_j alpha''(beta u_j^[k] + h_j, beta^2 sigma2),
// from u^[1] = 0, u^[2] = sqrt(q) G 1, for exactly `iterations` steps of the
// index k (no early stopping). g must be the normalized interaction matrix
// (entries of variance 1/n); the field h is tau t_bar + x_bar theta or its
// all-control counterpart according to `variant`.
AmpState amp_iterate(const Eigen::MatrixXd& g, const BaseMeasure& mu,
                     double tau, const Eigen::VectorXd& theta,
                     const Eigen::VectorXd& t_bar, const Eigen::MatrixXd& x_bar,
                     double beta, const FixedPoint& fp, int iterations,
                     AllocationVariant variant);

// RMS self-consistency error of m against the corrected mean-field map:
//   || m - alpha'(beta G m + h - beta^2 sigma2 m, beta^2 sigma2) || / sqrt(n).
// Zero at beta = 0; small iff m solves the corrected fixed-point equation.
double tap_residual(const Eigen::VectorXd& m, const Eigen::MatrixXd& g,
                    const BaseMeasure& mu, const Eigen::VectorXd& h,
                    double beta, double sigma2);

struct AmpEffects {
  EffectPair effects;
  AmpState treated;
  AmpState control;
  FixedPoint fp_treated;
  FixedPoint fp_control;
};

// One plug-in replicate with precomputed fixed points (they do not depend on
// the randomization draw, so callers solve them once and reuse).
AmpEffects estimate_effects_amp(const Eigen::MatrixXd& g, const BaseMeasure& mu,
                                double tau, const Eigen::VectorXd& theta,
                                const Eigen::VectorXd& t_bar,
                                const Eigen::MatrixXd& x_bar, double beta,
                                const FixedPoint& fp_treated,
                                const FixedPoint& fp_control, int iterations,
                                double p_alloc = 0.5);

// Convenience overload that also solves both fixed points (rng drives the
// frozen Monte Carlo samples).
AmpEffects estimate_effects_amp(const Eigen::MatrixXd& g, const BaseMeasure& mu,
                                double tau, const Eigen::VectorXd& theta,
                                const CovariateDist& cov,
                                const Eigen::VectorXd& t_bar,
                                const Eigen::MatrixXd& x_bar, double beta,
                                const FixedPointOptions& fp_opt,
                                std::mt19937_64& rng, int iterations,
                                double p_alloc = 0.5);

}  // namespace netcausal
