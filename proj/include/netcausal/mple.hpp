#pragma once

#include <Eigen/Dense>

#include "netcausal/measure.hpp"
#include "netcausal/model.hpp"
#include "netcausal/network.hpp"

namespace netcausal {

// Maximum pseudo-likelihood for the outcome field. The objective is
//   l(tau, theta) = (1/n) sum_i [ y_i (m_i + tau t_i + theta' x_i)
//                                 - alpha(m_i + tau t_i + theta' x_i, 0) ],
// with m_i = (A y)_i held fixed (data is fixed during a fit). Coordinates are
// ordered theta first, tau last, matching the stacked design row (x_i, t_i).
double pl_objective(const Dataset& data, const InteractionMatrix& a,
                    const BaseMeasure& mu, double tau,
                    const Eigen::VectorXd& theta);

Eigen::VectorXd pl_gradient(const Dataset& data, const InteractionMatrix& a,
                            const BaseMeasure& mu, double tau,
                            const Eigen::VectorXd& theta);

// Curvature matrix (1/n) sum_i z_i z_i' alpha''(..), the negative Hessian of
// the objective; positive semidefinite for every parameter value.
Eigen::MatrixXd pl_neg_hessian(const Dataset& data, const InteractionMatrix& a,
                               const BaseMeasure& mu, double tau,
                               const Eigen::VectorXd& theta);

struct FitOptions {
  double tol = 1e-8;  // gradient 2-norm
  int max_iter = 200;
  double box_b = 1.0;  // |tau| bound
  double box_m = 5.0;  // per-coordinate |theta| / |gamma| bound
};

struct FitResult {
  ModelParams params;
  double objective = 0.0;
  double grad_norm = 0.0;
  double min_curvature = 0.0;  // smallest eigenvalue of the negative Hessian
  int iterations = 0;
  bool converged = false;
};

// Projected Newton ascent with step halving; gradient-ascent fallback when
// the curvature matrix is numerically singular. init defaults to zero.
FitResult fit_outcome(const Dataset& data, const InteractionMatrix& a,
                      const BaseMeasure& mu, const ModelParams& init,
                      const FitOptions& opt = {});
FitResult fit_outcome(const Dataset& data, const InteractionMatrix& a,
                      const BaseMeasure& mu, const FitOptions& opt = {});

// Same machinery for the treatment field: response t, offsets (M t)_i,
// design rows x_i, Rademacher single-site conditionals.
FitResult fit_propensity(const Dataset& data, const InteractionMatrix& m,
                         const Eigen::VectorXd& init_gamma,
                         const FitOptions& opt = {});
FitResult fit_propensity(const Dataset& data, const InteractionMatrix& m,
                         const FitOptions& opt = {});

}  // namespace netcausal
