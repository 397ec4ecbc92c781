// Command-line front end: network generation, data simulation, parameter
// fitting, effect estimation, full experiments, and a quick self-check.
// Exit codes: 0 success, 1 usage error, 2 invalid input, 3 non-convergence.
#include <CLI11.hpp>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>
#include <string>

#include "netcausal/amp.hpp"
#include "netcausal/meanfield.hpp"
#include "netcausal/mple.hpp"
#include "netcausal/pipeline.hpp"

using namespace netcausal;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitNoConverge = 3;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path + "'");
  out << text;
}

// Accepts a preset name, inline JSON, or a path to a JSON file.
BaseMeasure load_measure(const std::string& arg) {
  if (arg.find('{') != std::string::npos) return BaseMeasure::from_json(arg);
  if (std::filesystem::exists(arg)) return BaseMeasure::from_json(slurp(arg));
  return BaseMeasure::preset(arg);
}

// "uniform", "rademacher", or "point:<value>".
CovariateDist parse_cov(const std::string& arg) {
  if (arg == "uniform") return CovariateDist::uniform();
  if (arg == "rademacher") return CovariateDist::rademacher();
  if (arg.rfind("point:", 0) == 0)
    return CovariateDist::point_mass(std::stod(arg.substr(6)));
  throw std::invalid_argument("unknown covariate distribution '" + arg + "'");
}

json diagnostics_json(const NetworkDiagnostics& d) {
  return json{{"op_norm", d.op_norm},
              {"trace_square_over_n", d.trace_square_over_n},
              {"high_temperature", d.high_temperature},
              {"mean_field_ok", d.mean_field_ok},
              {"high_temp_threshold", d.high_temp_threshold},
              {"mean_field_threshold", d.mean_field_threshold},
              {"power_iteration_converged", d.power_iteration_converged}};
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty())
    std::cout << text << "\n";
  else
    spill(out_path, text + "\n");
}

int cmd_network(const std::string& family, int n, double beta, int degree,
                double p, double rho, const std::string& kernel,
                std::uint64_t seed, const std::string& in_path,
                const std::string& out_path) {
  if (!in_path.empty()) {
    auto a = read_matrix_coo(in_path);
    std::cout << diagnostics_json(diagnostics(a)).dump(2) << "\n";
    return kExitOk;
  }
  NetworkSpec spec;
  spec.family = family_from_name(family);
  spec.n = n;
  spec.beta = beta;
  spec.degree = degree;
  spec.p = p;
  spec.rho = rho;
  spec.kernel = kernel;
  auto rng = make_rng(seed, Stream::network);
  InteractionMatrix a = build_network(spec, rng);
  if (!out_path.empty()) write_matrix_coo(a, out_path, seed);
  std::cout << diagnostics_json(diagnostics(a)).dump(2) << "\n";
  return kExitOk;
}

int cmd_simulate(const std::string& spec_path, const std::string& data_path,
                 const std::string& net_path) {
  ExperimentSpec spec = experiment_spec_from_json(slurp(spec_path));
  SimulationResult sim = simulate_dataset(spec);
  write_dataset_csv(sim.data, data_path);
  if (!net_path.empty()) write_matrix_coo(*sim.network, net_path, spec.seed);
  std::cerr << "simulated n=" << sim.data.n() << " d=" << sim.data.d()
            << " -> " << data_path << "\n";
  return kExitOk;
}

int cmd_fit(const std::string& data_path, const std::string& net_path,
            const std::string& measure_arg, bool with_propensity, double tol,
            int max_iter, double box_b, double box_m, bool allow_nonconverged,
            const std::string& out_path) {
  Dataset data = read_dataset_csv(data_path);
  data.validate();
  InteractionMatrix a = read_matrix_coo(net_path);
  if (a.n() != data.n())
    throw std::invalid_argument("network size does not match dataset");
  BaseMeasure mu = load_measure(measure_arg);
  FitOptions opt;
  opt.tol = tol;
  opt.max_iter = max_iter;
  opt.box_b = box_b;
  opt.box_m = box_m;
  FitResult outcome = fit_outcome(data, a, mu, opt);
  ModelParams params = outcome.params;
  params.gamma = Eigen::VectorXd::Zero(data.d());
  bool converged = outcome.converged;
  json extra{{"outcome", {{"objective", outcome.objective},
                          {"grad_norm", outcome.grad_norm},
                          {"min_curvature", outcome.min_curvature},
                          {"iterations", outcome.iterations},
                          {"converged", outcome.converged}}}};
  if (with_propensity) {
    FitResult prop = fit_propensity(data, a, opt);
    params.gamma = prop.params.gamma;
    converged = converged && prop.converged;
    extra["propensity"] = {{"objective", prop.objective},
                           {"grad_norm", prop.grad_norm},
                           {"iterations", prop.iterations},
                           {"converged", prop.converged}};
  }
  json out = json::parse(params_to_json(params));
  out["fit"] = extra;
  emit(out.dump(2), out_path);
  if (!converged && !allow_nonconverged) {
    std::cerr << "error: fit did not converge (rerun with "
                 "--allow-nonconverged to keep the estimate)\n";
    return kExitNoConverge;
  }
  return kExitOk;
}

int cmd_estimate(const std::string& net_path, const std::string& params_path,
                 const std::string& algo, int iterations, int replicates,
                 double zeta, double p_alloc, int mc_samples, double ci_fatten,
                 bool force_full, int workers, std::uint64_t seed,
                 const std::string& measure_arg, const std::string& cov_arg,
                 bool allow_nonconverged, const std::string& out_path) {
  auto a = std::make_shared<InteractionMatrix>(read_matrix_coo(net_path));
  ModelParams params = params_from_json(slurp(params_path));
  params.validate();
  EstimationOptions opt;
  opt.algo = algorithm_from_name(algo);
  opt.iterations = iterations;
  opt.replicates = replicates;
  opt.zeta = zeta;
  opt.p_alloc = p_alloc;
  opt.mc_samples = mc_samples;
  opt.ci_fatten = ci_fatten;
  opt.force_full_iterations = force_full;
  opt.workers = workers;
  EffectEstimate est =
      replicate_effects(a, load_measure(measure_arg), params.tau, params.theta,
                        parse_cov(cov_arg), opt, seed);
  emit(estimate_to_json(est), out_path);
  if (!est.all_replicates_converged && !allow_nonconverged) {
    std::cerr << "error: some replicates did not converge (rerun with "
                 "--allow-nonconverged to keep the estimate)\n";
    return kExitNoConverge;
  }
  return kExitOk;
}

int cmd_experiment(const std::string& spec_path, const std::string& out_path,
                   const std::string& csv_path, bool quiet) {
  ExperimentSpec spec = experiment_spec_from_json(slurp(spec_path));
  ExperimentReport report = run_experiment(spec);
  if (!out_path.empty()) spill(out_path, report_to_json(report));
  std::string rows = report_csv_rows(report);
  if (!csv_path.empty()) spill(csv_path, rows);
  if (!quiet) std::cout << rows;
  if (!report.outcome_fit.converged ||
      !report.estimate.all_replicates_converged)
    return kExitNoConverge;
  return kExitOk;
}

// Fast internal consistency checks; exercises each layer once.
int cmd_validate() {
  int failures = 0;
  auto check = [&](const std::string& name, bool ok) {
    std::cout << (ok ? "ok: " : "FAILED: ") << name << "\n";
    if (!ok) ++failures;
  };

  BaseMeasure rad = BaseMeasure::rademacher();
  bool tilts = true;
  for (double l1 : {-2.0, -0.3, 0.0, 1.7}) {
    tilts = tilts && std::abs(rad.alpha_prime({l1, 0.0}) - std::tanh(l1)) < 1e-12;
    double s = 1.0 / std::cosh(l1);
    tilts = tilts && std::abs(rad.alpha_second({l1, 0.0}) - s * s) < 1e-12;
  }
  check("two-point tilt closed forms", tilts);

  BaseMeasure uni = BaseMeasure::uniform();
  double lang = 1.0 / std::tanh(0.7) - 1.0 / 0.7;
  check("uniform tilt quadrature",
        std::abs(uni.alpha_prime({0.7, 0.0}) - lang) < 1e-10);

  {
    auto a = std::make_shared<InteractionMatrix>(complete_graph(20, 0.0));
    OutcomeModel m(a, 0.5, Eigen::VectorXd::Zero(1), rad);
    Eigen::VectorXd t(20);
    for (int i = 0; i < 20; ++i) t[i] = (i % 2 == 0) ? 1.0 : -1.0;
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(20, 1);
    MfEffects r = estimate_effects_mf(m, t, x);
    check("decoupled mean-field closed form",
          std::abs(r.effects.de - 2 * std::tanh(0.5)) < 1e-12);

    std::mt19937_64 rng(1);
    auto g0 = gaussian_sk(20, 0.0, rng);
    FixedPointOptions fpo;
    fpo.mc_samples = 200;
    std::mt19937_64 f1(2), f2(3);
    FixedPoint fpt = solve_fixed_point(rad, 0.5, Eigen::VectorXd::Zero(1),
                                       CovariateDist::point_mass(0.0), 0.0,
                                       AllocationVariant::treated_random, fpo,
                                       f1);
    FixedPoint fpc = solve_fixed_point(rad, 0.5, Eigen::VectorXd::Zero(1),
                                       CovariateDist::point_mass(0.0), 0.0,
                                       AllocationVariant::all_control, fpo, f2);
    AmpEffects amp = estimate_effects_amp(g0.normalized(), rad, 0.5,
                                          Eigen::VectorXd::Zero(1), t, x, 0.0,
                                          fpt, fpc, 10);
    check("zero-coupling message passing equals decoupled mean field",
          amp.effects.de == r.effects.de && amp.effects.ie == r.effects.ie);
  }

  {
    std::vector<double> s;
    for (int i = 1; i <= 100; ++i) s.push_back(i);
    auto ci = quantile_ci(s, 0.05);
    check("quantile interpolation convention",
          std::abs(ci.first - 3.475) < 1e-12 &&
              std::abs(ci.second - 97.525) < 1e-12);
  }

  {
    Eigen::VectorXd u(4), ut(4), t(4);
    u << 0.3, -0.2, 0.6, 0.1;
    ut << 0.1, -0.3, 0.2, 0.0;
    t << 1, -1, 1, -1;
    EffectPair exact = plug_in_effects(u, ut, t, 0.5);
    EffectPair near = plug_in_effects(u, ut, t, 0.5 + 1e-12);
    check("allocation weighting is continuous at one half",
          std::abs(exact.de - near.de) < 1e-9 &&
              std::abs(exact.ie - near.ie) < 1e-9);
  }

  if (failures > 0) {
    std::cerr << failures << " self-check(s) failed\n";
    return kExitInvalid;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "netcausal: direct and spillover effect estimation on interaction "
      "networks"};
  app.require_subcommand(1);

  // network
  auto* net = app.add_subcommand(
      "network", "Generate an interaction matrix and print its diagnostics");
  std::string nf_family = "complete", nf_kernel = "product", nf_in, nf_out;
  int nf_n = 100, nf_degree = 0;
  double nf_beta = 0.3, nf_p = 0.5, nf_rho = 1.0;
  std::uint64_t nf_seed = 0;
  net->add_option("--family", nf_family,
                  "complete|regular|erdos_renyi|graphon|gaussian");
  net->add_option("--n", nf_n, "number of units");
  net->add_option("--beta", nf_beta, "interaction strength");
  net->add_option("--degree", nf_degree, "regular: vertex degree");
  net->add_option("--p", nf_p, "erdos_renyi: edge probability");
  net->add_option("--rho", nf_rho, "graphon: sparsity multiplier");
  net->add_option("--kernel", nf_kernel, "graphon: product|min|constant");
  net->add_option("--seed", nf_seed, "random seed");
  net->add_option("--in", nf_in, "diagnose an existing matrix file instead");
  net->add_option("--out", nf_out, "write the matrix (COO + JSON sidecar)");

  // simulate
  auto* sim = app.add_subcommand(
      "simulate", "Draw network, covariates, treatments and outcomes");
  std::string sm_spec, sm_data = "dataset.csv", sm_net;
  sim->add_option("--spec", sm_spec, "experiment spec JSON file")->required();
  sim->add_option("--out-data", sm_data, "output dataset CSV");
  sim->add_option("--out-network", sm_net, "also write the drawn network");

  // fit
  auto* fit = app.add_subcommand(
      "fit", "Maximum pseudo-likelihood fit of the outcome field");
  std::string ft_data, ft_net, ft_measure = "rademacher", ft_out;
  bool ft_prop = false, ft_allow = false;
  double ft_tol = 1e-8, ft_box_b = 1.0, ft_box_m = 5.0;
  int ft_max_iter = 200;
  fit->add_option("--data", ft_data, "dataset CSV")->required();
  fit->add_option("--network", ft_net, "interaction matrix file")->required();
  fit->add_option("--measure", ft_measure,
                  "base measure: preset name, JSON, or JSON file");
  fit->add_flag("--fit-propensity", ft_prop,
                "also fit the treatment field coefficient");
  fit->add_option("--tol", ft_tol, "gradient norm tolerance");
  fit->add_option("--max-iter", ft_max_iter, "iteration cap");
  fit->add_option("--box-b", ft_box_b, "treatment coefficient bound");
  fit->add_option("--box-m", ft_box_m, "covariate coefficient bound");
  fit->add_flag("--allow-nonconverged", ft_allow,
                "exit 0 even if the fit did not converge");
  fit->add_option("--out", ft_out, "write parameter JSON here (default stdout)");

  // estimate
  auto* est = app.add_subcommand(
      "estimate", "Replicate plug-in effect estimates with quantile intervals");
  std::string es_net, es_params, es_algo = "meanfield",
              es_measure = "rademacher", es_cov = "uniform", es_out;
  int es_iter = 500, es_reps = 100, es_mc = 1000, es_workers = 0;
  double es_zeta = 0.05, es_palloc = 0.5, es_fatten = 0.0;
  bool es_force = false, es_allow = false;
  std::uint64_t es_seed = 0;
  est->add_option("--network", es_net, "interaction matrix file")->required();
  est->add_option("--params", es_params, "parameter JSON file")->required();
  est->add_option("--algo", es_algo, "meanfield|amp");
  est->add_option("--iterations", es_iter, "iterations per replicate (M)");
  est->add_option("--replicates", es_reps, "number of replicates (k)");
  est->add_option("--zeta", es_zeta, "interval level 1 - zeta");
  est->add_option("--p-alloc", es_palloc, "allocation probability");
  est->add_option("--mc-samples", es_mc, "fixed-point Monte Carlo size");
  est->add_option("--ci-fatten", es_fatten, "additive interval widening");
  est->add_flag("--force-full-iterations", es_force,
                "disable early stopping in the mean-field chains");
  est->add_option("--workers", es_workers, "worker threads (0: automatic)");
  est->add_option("--seed", es_seed, "replicate seed");
  est->add_option("--measure", es_measure, "base measure");
  est->add_option("--cov", es_cov, "uniform|rademacher|point:<v>");
  est->add_flag("--allow-nonconverged", es_allow,
                "exit 0 even if some replicates did not converge");
  est->add_option("--out", es_out, "write effects JSON here (default stdout)");

  // experiment
  auto* exp = app.add_subcommand(
      "experiment", "Full pipeline: simulate, fit, estimate, oracle truth");
  std::string ex_spec, ex_out, ex_csv;
  bool ex_quiet = false;
  exp->add_option("--spec", ex_spec, "experiment spec JSON file")->required();
  exp->add_option("--out", ex_out, "write the full report JSON");
  exp->add_option("--csv", ex_csv, "write the summary rows CSV");
  exp->add_flag("--quiet", ex_quiet, "suppress the stdout summary");

  // validate
  app.add_subcommand("validate", "Run fast internal consistency checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // collapse CLI11's per-error exit codes: 0 for --help/--version, 1 for
    // any genuine usage error (2/3 are reserved for input/convergence)
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (net->parsed())
      return cmd_network(nf_family, nf_n, nf_beta, nf_degree, nf_p, nf_rho,
                         nf_kernel, nf_seed, nf_in, nf_out);
    if (sim->parsed()) return cmd_simulate(sm_spec, sm_data, sm_net);
    if (fit->parsed())
      return cmd_fit(ft_data, ft_net, ft_measure, ft_prop, ft_tol, ft_max_iter,
                     ft_box_b, ft_box_m, ft_allow, ft_out);
    if (est->parsed())
      return cmd_estimate(es_net, es_params, es_algo, es_iter, es_reps,
                          es_zeta, es_palloc, es_mc, es_fatten, es_force,
                          es_workers, es_seed, es_measure, es_cov, es_allow,
                          es_out);
    if (exp->parsed())
      return cmd_experiment(ex_spec, ex_out, ex_csv, ex_quiet);
    return cmd_validate();
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return std::string(e.what()).find("converge") != std::string::npos
               ? kExitNoConverge
               : kExitInvalid;
  }
}
