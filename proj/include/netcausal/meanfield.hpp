#pragma once

#include <Eigen/Dense>

#include "netcausal/estimands.hpp"
#include "netcausal/model.hpp"

namespace netcausal {

struct MfOptions {
  int max_iter = 500;
  double tol = 1e-8;  // RMS update norm ||u_next - u|| / sqrt(n)
  // Run exactly max_iter iterations regardless of tol (table-replication
  // mode); convergence is still reported via the residual.
  bool force_full_iterations = false;
};

struct MfIterationResult {
  Eigen::VectorXd u;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

// Naive mean-field iteration u <- alpha'(A u + tau t + x theta, 0) from
// u = 0. Treatment enters through t; passing the all-minus-ones vector gives
// the all-control chain.
MfIterationResult mf_iterate(const OutcomeModel& m, const Eigen::VectorXd& t,
                             const Eigen::MatrixXd& x, const MfOptions& opt);

struct MeanFieldState {
  MfIterationResult treated;  // chain driven by the randomization draw
  MfIterationResult control;  // chain driven by all-control (-1,...,-1)
};

struct MfEffects {
  EffectPair effects;
  MeanFieldState state;
};

// One plug-in replicate: run both chains at the given randomization draw
// (t_bar, x_bar) and combine the site means into DE/IE.
MfEffects estimate_effects_mf(const OutcomeModel& m,
                              const Eigen::VectorXd& t_bar,
                              const Eigen::MatrixXd& x_bar,
                              const MfOptions& opt = {}, double p_alloc = 0.5);

}  // namespace netcausal
