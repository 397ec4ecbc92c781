#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <random>
#include <string>

#include "netcausal/measure.hpp"
#include "netcausal/network.hpp"

namespace netcausal {

// Distribution of one covariate coordinate; coordinates are iid across the
// n x d matrix.
struct CovariateDist {
  enum class Kind { uniform, point_mass, rademacher };
  Kind kind = Kind::uniform;
  double value = 0.0;  // point_mass location, must lie in [-1,1]

  static CovariateDist uniform() { return {Kind::uniform, 0.0}; }
  static CovariateDist point_mass(double v);
  static CovariateDist rademacher() { return {Kind::rademacher, 0.0}; }
};

struct ModelParams {
  double tau = 0.0;
  Eigen::VectorXd theta;
  Eigen::VectorXd gamma;
  double box_b = 1.0;  // |tau| <= box_b
  double box_m = 5.0;  // |theta_j|, |gamma_j| <= box_m

  void validate() const;  // throws std::invalid_argument on box violation
};

std::string params_to_json(const ModelParams& p);
ModelParams params_from_json(const std::string& text);

// Observed data: outcomes y in [-1,1]^n, treatments t in {-1,+1}^n,
// covariates x in [-1,1]^{n x d}.
struct Dataset {
  Eigen::VectorXd y;
  Eigen::VectorXd t;
  Eigen::MatrixXd x;

  int n() const { return static_cast<int>(y.size()); }
  int d() const { return static_cast<int>(x.cols()); }
  void validate() const;
};

void write_dataset_csv(const Dataset& data, const std::string& path);
Dataset read_dataset_csv(const std::string& path);

// Outcome field: f(y | t, x) proportional to
//   exp( y' A y / 2 + y' (tau t + x theta) ) prod_i dmu(y_i).
struct OutcomeModel {
  std::shared_ptr<const InteractionMatrix> a;
  double tau = 0.0;
  Eigen::VectorXd theta;
  BaseMeasure mu;

  OutcomeModel(std::shared_ptr<const InteractionMatrix> a_, double tau_,
               Eigen::VectorXd theta_, BaseMeasure mu_);
  int n() const { return a->n(); }
};

// Treatment field: P(T = t | x) proportional to
//   exp( t' M t / 2 + sum_i t_i gamma' x_i ),  t in {-1,+1}^n.
struct PropensityModel {
  std::shared_ptr<const InteractionMatrix> m;
  Eigen::VectorXd gamma;

  PropensityModel(std::shared_ptr<const InteractionMatrix> m_,
                  Eigen::VectorXd gamma_);
  int n() const { return m->n(); }
};

Eigen::MatrixXd sample_covariates(int n, int d, const CovariateDist& dist,
                                  std::mt19937_64& rng);

// Single-site conditional of y_i given the rest: an exponential tilt of mu
// with lambda1 = (A y)_i + tau t_i + theta' x_i and lambda2 = 0.
TiltParams conditional_tilt_outcome(const OutcomeModel& m,
                                    const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& t,
                                    const Eigen::MatrixXd& x, int i);

// Systematic-scan Gibbs. Initial state is an iid draw from mu; runs
// burn_in + sweeps full scans and returns the final state. on_sweep, if set,
// is invoked with the current state after every post-burn-in sweep.
Eigen::VectorXd gibbs_sample_outcome(
    const OutcomeModel& m, const Eigen::VectorXd& t, const Eigen::MatrixXd& x,
    int sweeps, int burn_in, std::mt19937_64& rng,
    const std::function<void(const Eigen::VectorXd&)>& on_sweep = nullptr);

Eigen::VectorXd gibbs_sample_treatment(
    const PropensityModel& m, const Eigen::MatrixXd& x, int sweeps, int burn_in,
    std::mt19937_64& rng,
    const std::function<void(const Eigen::VectorXd&)>& on_sweep = nullptr);

// Exact site means and log partition function by full enumeration over the
// support of mu^n (discrete mu only; guarded to <= 10^7 states).
struct EnumerationResult {
  Eigen::VectorXd means;
  double log_z;
};
EnumerationResult brute_force_means(const OutcomeModel& m,
                                    const Eigen::VectorXd& t,
                                    const Eigen::MatrixXd& x);

// Exact treatment-field site means via the same enumeration (M as the
// interaction, gamma' x_i as the field, Rademacher support).
EnumerationResult brute_force_treatment_means(const PropensityModel& m,
                                              const Eigen::MatrixXd& x);

// log of the unnormalized outcome density at y (the exponent only; the
// product measure carries no density factor for discrete/quadrature atoms).
double log_unnormalized(const OutcomeModel& m, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& t, const Eigen::MatrixXd& x);

}  // namespace netcausal
