#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "netcausal/amp.hpp"
#include "netcausal/meanfield.hpp"
#include "netcausal/model.hpp"
#include "netcausal/mple.hpp"
#include "netcausal/network.hpp"
#include "netcausal/rng.hpp"

namespace netcausal {

enum class Algorithm { meanfield, amp };

std::string algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);

struct NetworkSpec {
  GraphFamily family = GraphFamily::complete;
  int n = 100;
  double beta = 0.3;
  int degree = 0;                  // regular
  double p = 0.5;                  // erdos_renyi
  double rho = 1.0;                // graphon
  std::string kernel = "product";  // graphon kernel name
};

// Named graphon kernels usable from serialized specs:
//   product:  w(u,v) = u v
//   min:      w(u,v) = min(u,v)
//   constant: w(u,v) = 1
std::function<double(double, double)> graphon_kernel(const std::string& name);

InteractionMatrix build_network(const NetworkSpec& spec, std::mt19937_64& rng);

struct GibbsBudget {
  int sweeps = 200;
  int burn_in = 50;
};

struct EstimationOptions {
  Algorithm algo = Algorithm::meanfield;
  int iterations = 500;  // M
  int replicates = 100;  // k
  double zeta = 0.05;    // CI level 1 - zeta
  double p_alloc = 0.5;
  int mc_samples = 1000;  // fixed-point Monte Carlo size (amp)
  double ci_fatten = 0.0;
  bool force_full_iterations = false;
  int workers = 0;  // 0: automatic
};

struct EffectEstimate {
  std::vector<double> de_replicates;
  std::vector<double> ie_replicates;
  double de = 0.0;  // replicate average
  double ie = 0.0;
  std::pair<double, double> de_ci{0.0, 0.0};
  std::pair<double, double> ie_ci{0.0, 0.0};
  double zeta = 0.05;
  Algorithm algo = Algorithm::meanfield;
  bool oracle = false;
  // provenance
  std::uint64_t seed = 0;
  int n = 0;
  int iterations = 0;
  double tau_used = 0.0;
  Eigen::VectorXd theta_used;
  bool forced_full_iterations = false;
  bool all_replicates_converged = true;
  std::optional<FixedPoint> fp_treated;
  std::optional<FixedPoint> fp_control;
};

// Two-sided quantile interval at level 1 - zeta: linear interpolation at
// rank (k-1) q + 1 (the common type-7 convention) of the sorted samples.
std::pair<double, double> quantile_ci(std::vector<double> samples, double zeta);

// k plug-in replicates: per replicate j the randomization draw (t_bar, x_bar)
// is redrawn from substream (seed, replicate, j) -- t_bar first, then x_bar --
// and the chosen algorithm maps it to (DE, IE). The observed data never
// enters; the network and parameters are fixed throughout. Replicates run
// concurrently but are keyed by index, so results are scheduling-independent.
EffectEstimate replicate_effects(std::shared_ptr<const InteractionMatrix> a,
                                 const BaseMeasure& mu, double tau,
                                 const Eigen::VectorXd& theta,
                                 const CovariateDist& cov,
                                 const EstimationOptions& opt,
                                 std::uint64_t seed);

// Same computation at caller-supplied (typically true) parameters, flagged as
// the oracle run; bit-identical to replicate_effects given equal arguments.
EffectEstimate oracle_truth(std::shared_ptr<const InteractionMatrix> a,
                            const BaseMeasure& mu, double tau,
                            const Eigen::VectorXd& theta,
                            const CovariateDist& cov,
                            const EstimationOptions& opt, std::uint64_t seed);

struct ExperimentSpec {
  std::string label;  // row label; defaults to "n=<n>" when empty
  NetworkSpec network;
  int d = 1;
  std::string mu = "rademacher";  // preset name or serialized measure
  CovariateDist cov = CovariateDist::uniform();
  ModelParams params;  // true (tau, theta, gamma)
  GibbsBudget gibbs;
  EstimationOptions estimation;
  bool fit_propensity = false;
  std::uint64_t seed = 0;
};

std::string experiment_spec_to_json(const ExperimentSpec& spec);
ExperimentSpec experiment_spec_from_json(const std::string& text);

struct SimulationResult {
  std::shared_ptr<InteractionMatrix> network;
  Dataset data;
};

// Stages 1-4 of an experiment: draw the network (substream "network"),
// covariates ("covariates"), treatments via the propensity field with M = A
// ("treatment"), outcomes ("outcome"). Gibbs budgets from spec.gibbs.
SimulationResult simulate_dataset(const ExperimentSpec& spec);

struct StageTiming {
  double simulate = 0.0;
  double fit = 0.0;
  double estimate = 0.0;
  double truth = 0.0;
  double total = 0.0;
};

struct ExperimentReport {
  ExperimentSpec spec;
  NetworkDiagnostics diag;
  Dataset data;
  FitResult outcome_fit;
  std::optional<FitResult> propensity_fit;
  EffectEstimate estimate;  // at the fitted parameters
  EffectEstimate truth;     // at the true parameters, same replicate seeds
  StageTiming timing;
};

// Full pipeline: simulate -> fit -> estimate at fitted params -> oracle truth
// at true params. Stage failures are rethrown with the stage name prefixed.
ExperimentReport run_experiment(const ExperimentSpec& spec);

// Serialized report; "timing" is a separate top-level key so callers can
// compare reports net of wall-clock noise.
std::string report_to_json(const ExperimentReport& report);

// Paper-style rows: label,effect,truth,estimate,ci_lo,ci_hi,runtime_s
// (one row for the direct effect, one for the indirect effect).
std::string report_csv_rows(const ExperimentReport& report,
                            bool with_header = true);

std::string estimate_to_json(const EffectEstimate& e);

}  // namespace netcausal
