#include "netcausal/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

namespace netcausal {

namespace {
using nlohmann::json;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::vector<double> to_vec(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd from_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
}

std::string cov_kind_name(CovariateDist::Kind k) {
  switch (k) {
    case CovariateDist::Kind::uniform: return "uniform";
    case CovariateDist::Kind::point_mass: return "point_mass";
    case CovariateDist::Kind::rademacher: return "rademacher";
  }
  return "uniform";
}

CovariateDist cov_from_json(const json& j) {
  if (j.is_string()) {
    std::string k = j.get<std::string>();
    if (k == "uniform") return CovariateDist::uniform();
    if (k == "rademacher") return CovariateDist::rademacher();
    throw std::invalid_argument("covariates: unknown kind '" + k + "'");
  }
  std::string k = j.at("kind").get<std::string>();
  if (k == "uniform") return CovariateDist::uniform();
  if (k == "rademacher") return CovariateDist::rademacher();
  if (k == "point_mass")
    return CovariateDist::point_mass(j.at("value").get<double>());
  throw std::invalid_argument("covariates: unknown kind '" + k + "'");
}

json cov_to_json(const CovariateDist& c) {
  json j;
  j["kind"] = cov_kind_name(c.kind);
  if (c.kind == CovariateDist::Kind::point_mass) j["value"] = c.value;
  return j;
}

json fit_to_json(const FitResult& f) {
  json j;
  j["tau"] = f.params.tau;
  j["theta"] = to_vec(f.params.theta);
  j["gamma"] = to_vec(f.params.gamma);
  j["objective"] = f.objective;
  j["grad_norm"] = f.grad_norm;
  j["min_curvature"] = f.min_curvature;
  j["iterations"] = f.iterations;
  j["converged"] = f.converged;
  return j;
}

json fp_to_json(const FixedPoint& fp) {
  json j;
  j["q"] = fp.q;
  j["sigma2"] = fp.sigma2;
  j["iterations"] = fp.iterations;
  j["mc_samples"] = fp.mc_samples;
  j["converged"] = fp.converged;
  return j;
}

json estimate_to_json_obj(const EffectEstimate& e) {
  json j;
  j["algo"] = algorithm_name(e.algo);
  j["oracle"] = e.oracle;
  j["de"] = {{"avg", e.de},
             {"ci", {e.de_ci.first, e.de_ci.second}},
             {"replicates", e.de_replicates}};
  j["ie"] = {{"avg", e.ie},
             {"ci", {e.ie_ci.first, e.ie_ci.second}},
             {"replicates", e.ie_replicates}};
  j["zeta"] = e.zeta;
  j["seed"] = e.seed;
  j["n"] = e.n;
  j["iterations"] = e.iterations;
  j["tau_used"] = e.tau_used;
  j["theta_used"] = to_vec(e.theta_used);
  j["forced_full_iterations"] = e.forced_full_iterations;
  j["all_replicates_converged"] = e.all_replicates_converged;
  if (e.fp_treated) j["fixed_point_treated"] = fp_to_json(*e.fp_treated);
  if (e.fp_control) j["fixed_point_control"] = fp_to_json(*e.fp_control);
  return j;
}

// Re-raise the in-flight exception with a stage prefix, keeping
// invalid_argument distinct so callers can map it to a validation failure.
[[noreturn]] void rethrow_staged(const std::string& stage) {
  try {
    throw;
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(stage + ": " + e.what());
  } catch (const std::exception& e) {
    throw std::runtime_error(stage + ": " + e.what());
  }
}

}  // namespace

std::string algorithm_name(Algorithm a) {
  return a == Algorithm::meanfield ? "meanfield" : "amp";
}

Algorithm algorithm_from_name(const std::string& name) {
  if (name == "meanfield" || name == "mf") return Algorithm::meanfield;
  if (name == "amp") return Algorithm::amp;
  throw std::invalid_argument("pipeline: unknown algorithm '" + name + "'");
}

std::function<double(double, double)> graphon_kernel(const std::string& name) {
  if (name == "product") return [](double u, double v) { return u * v; };
  if (name == "min") return [](double u, double v) { return std::min(u, v); };
  if (name == "constant") return [](double, double) { return 1.0; };
  throw std::invalid_argument("pipeline: unknown graphon kernel '" + name + "'");
}

InteractionMatrix build_network(const NetworkSpec& spec, std::mt19937_64& rng) {
  switch (spec.family) {
    case GraphFamily::complete:
      return complete_graph(spec.n, spec.beta);
    case GraphFamily::regular:
      return regular_graph(spec.n, spec.degree, spec.beta, rng);
    case GraphFamily::erdos_renyi:
      return erdos_renyi(spec.n, spec.p, spec.beta, rng);
    case GraphFamily::graphon:
      return graphon(spec.n, graphon_kernel(spec.kernel), spec.rho, spec.beta,
                     rng);
    case GraphFamily::gaussian:
      return gaussian_sk(spec.n, spec.beta, rng);
    case GraphFamily::custom:
      throw std::invalid_argument(
          "pipeline: custom networks must be loaded from file, not built");
  }
  throw std::invalid_argument("pipeline: bad network family");
}

std::pair<double, double> quantile_ci(std::vector<double> samples, double zeta) {
  if (samples.empty())
    throw std::invalid_argument("quantile: need at least one sample");
  if (!(zeta > 0.0 && zeta < 1.0))
    throw std::invalid_argument("quantile: zeta must lie in (0,1)");
  std::sort(samples.begin(), samples.end());
  const auto k = samples.size();
  auto type7 = [&](double q) {
    double h = static_cast<double>(k - 1) * q;
    std::size_t lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= k) return samples[k - 1];
    double frac = h - static_cast<double>(lo);
    return samples[lo] + frac * (samples[lo + 1] - samples[lo]);
  };
  return {type7(zeta / 2.0), type7(1.0 - zeta / 2.0)};
}

EffectEstimate replicate_effects(std::shared_ptr<const InteractionMatrix> a,
                                 const BaseMeasure& mu, double tau,
                                 const Eigen::VectorXd& theta,
                                 const CovariateDist& cov,
                                 const EstimationOptions& opt,
                                 std::uint64_t seed) {
  if (!a) throw std::invalid_argument("pipeline: interaction matrix required");
  if (opt.replicates < 1)
    throw std::invalid_argument("pipeline: need at least one replicate");
  if (!(opt.zeta > 0.0 && opt.zeta < 1.0))
    throw std::invalid_argument("pipeline: zeta must lie in (0,1)");
  if (!(opt.p_alloc > 0.0 && opt.p_alloc < 1.0))
    throw std::invalid_argument("pipeline: allocation p must lie in (0,1)");
  const int n = a->n();
  const int d = static_cast<int>(theta.size());
  const int k = opt.replicates;

  EffectEstimate out;
  out.algo = opt.algo;
  out.zeta = opt.zeta;
  out.seed = seed;
  out.n = n;
  out.iterations = opt.iterations;
  out.tau_used = tau;
  out.theta_used = theta;
  out.forced_full_iterations = opt.force_full_iterations;
  out.de_replicates.resize(k);
  out.ie_replicates.resize(k);

  // AMP preparation: fixed points are draw-independent, solve once.
  Eigen::MatrixXd g;
  FixedPoint fpt, fpc;
  if (opt.algo == Algorithm::amp) {
    g = a->normalized();
    FixedPointOptions fp_opt;
    fp_opt.mc_samples = opt.mc_samples;
    auto rng_t = make_rng(seed, Stream::fixed_point_treated);
    auto rng_c = make_rng(seed, Stream::fixed_point_control);
    fpt = solve_fixed_point(mu, tau, theta, cov, a->beta(),
                            AllocationVariant::treated_random, fp_opt, rng_t,
                            opt.p_alloc);
    fpc = solve_fixed_point(mu, tau, theta, cov, a->beta(),
                            AllocationVariant::all_control, fp_opt, rng_c,
                            opt.p_alloc);
    if (!fpt.converged || !fpc.converged)
      throw std::runtime_error("pipeline: fixed point iteration did not converge");
    out.fp_treated = fpt;
    out.fp_control = fpc;
  }

  OutcomeModel model(a, tau, theta, mu);
  MfOptions mf_opt;
  mf_opt.max_iter = opt.iterations;
  mf_opt.force_full_iterations = opt.force_full_iterations;

  std::atomic<int> next{0};
  std::atomic<bool> any_nonconverged{false};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  int first_error_index = -1;

  auto worker = [&]() {
    while (true) {
      int j = next.fetch_add(1);
      if (j >= k) return;
      try {
        auto rng = make_rng(seed, Stream::replicate, static_cast<std::uint64_t>(j));
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        Eigen::VectorXd t_bar(n);
        for (int i = 0; i < n; ++i)
          t_bar[i] = coin(rng) < opt.p_alloc ? 1.0 : -1.0;
        Eigen::MatrixXd x_bar = sample_covariates(n, d, cov, rng);
        EffectPair eff;
        if (opt.algo == Algorithm::meanfield) {
          MfEffects r = estimate_effects_mf(model, t_bar, x_bar, mf_opt,
                                            opt.p_alloc);
          if (!r.state.treated.converged || !r.state.control.converged)
            any_nonconverged.store(true);
          eff = r.effects;
        } else {
          AmpEffects r = estimate_effects_amp(g, mu, tau, theta, t_bar, x_bar,
                                              a->beta(), fpt, fpc,
                                              opt.iterations, opt.p_alloc);
          eff = r.effects;
        }
        out.de_replicates[j] = eff.de;
        out.ie_replicates[j] = eff.ie;
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error || j < first_error_index) {
          first_error = std::current_exception();
          first_error_index = j;
        }
        next.store(k);  // stop all workers
        return;
      }
    }
  };

  int workers = opt.workers > 0
                    ? opt.workers
                    : std::min<int>(8, std::max<unsigned>(
                                           1, std::thread::hardware_concurrency()));
  workers = std::min(workers, k);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) {
    try {
      std::rethrow_exception(first_error);
    } catch (...) {
      rethrow_staged("replicate " + std::to_string(first_error_index));
    }
  }
  out.all_replicates_converged = !any_nonconverged.load();

  out.de = 0.0;
  out.ie = 0.0;
  for (int j = 0; j < k; ++j) {
    out.de += out.de_replicates[j];
    out.ie += out.ie_replicates[j];
  }
  out.de /= k;
  out.ie /= k;
  out.de_ci = quantile_ci(out.de_replicates, opt.zeta);
  out.ie_ci = quantile_ci(out.ie_replicates, opt.zeta);
  out.de_ci.first -= opt.ci_fatten;
  out.de_ci.second += opt.ci_fatten;
  out.ie_ci.first -= opt.ci_fatten;
  out.ie_ci.second += opt.ci_fatten;
  return out;
}

EffectEstimate oracle_truth(std::shared_ptr<const InteractionMatrix> a,
                            const BaseMeasure& mu, double tau,
                            const Eigen::VectorXd& theta,
                            const CovariateDist& cov,
                            const EstimationOptions& opt, std::uint64_t seed) {
  EffectEstimate e = replicate_effects(std::move(a), mu, tau, theta, cov, opt, seed);
  e.oracle = true;
  return e;
}

std::string experiment_spec_to_json(const ExperimentSpec& spec) {
  json j;
  j["label"] = spec.label;
  json net;
  net["family"] = family_name(spec.network.family);
  net["n"] = spec.network.n;
  net["beta"] = spec.network.beta;
  net["degree"] = spec.network.degree;
  net["p"] = spec.network.p;
  net["rho"] = spec.network.rho;
  net["kernel"] = spec.network.kernel;
  j["network"] = net;
  j["d"] = spec.d;
  j["mu"] = spec.mu;
  j["covariates"] = cov_to_json(spec.cov);
  j["params"] = json::parse(params_to_json(spec.params));
  j["gibbs"] = {{"sweeps", spec.gibbs.sweeps}, {"burn_in", spec.gibbs.burn_in}};
  json est;
  est["algo"] = algorithm_name(spec.estimation.algo);
  est["iterations"] = spec.estimation.iterations;
  est["replicates"] = spec.estimation.replicates;
  est["zeta"] = spec.estimation.zeta;
  est["p_alloc"] = spec.estimation.p_alloc;
  est["mc_samples"] = spec.estimation.mc_samples;
  est["ci_fatten"] = spec.estimation.ci_fatten;
  est["force_full_iterations"] = spec.estimation.force_full_iterations;
  est["workers"] = spec.estimation.workers;
  j["estimation"] = est;
  j["fit_propensity"] = spec.fit_propensity;
  j["seed"] = spec.seed;
  return j.dump(2);
}

ExperimentSpec experiment_spec_from_json(const std::string& text) {
  json j = json::parse(text);
  ExperimentSpec spec;
  spec.label = j.value("label", std::string());
  const json& net = j.at("network");
  spec.network.family = family_from_name(net.at("family").get<std::string>());
  spec.network.n = net.at("n").get<int>();
  spec.network.beta = net.at("beta").get<double>();
  spec.network.degree = net.value("degree", 0);
  spec.network.p = net.value("p", 0.5);
  spec.network.rho = net.value("rho", 1.0);
  spec.network.kernel = net.value("kernel", std::string("product"));
  spec.d = j.value("d", 1);
  if (j.contains("mu")) {
    if (j["mu"].is_string())
      spec.mu = j["mu"].get<std::string>();
    else
      spec.mu = j["mu"].dump();
  }
  if (j.contains("covariates")) spec.cov = cov_from_json(j["covariates"]);
  if (j.contains("params")) {
    spec.params = params_from_json(j["params"].dump());
  } else {
    spec.params.theta = Eigen::VectorXd::Zero(spec.d);
  }
  if (spec.params.theta.size() != spec.d)
    throw std::invalid_argument("pipeline: theta length must equal d");
  if (spec.params.gamma.size() == 0)
    spec.params.gamma = Eigen::VectorXd::Zero(spec.d);
  if (spec.params.gamma.size() != spec.d)
    throw std::invalid_argument("pipeline: gamma length must equal d");
  if (j.contains("gibbs")) {
    spec.gibbs.sweeps = j["gibbs"].value("sweeps", 200);
    spec.gibbs.burn_in = j["gibbs"].value("burn_in", 50);
  }
  if (j.contains("estimation")) {
    const json& est = j["estimation"];
    spec.estimation.algo =
        algorithm_from_name(est.value("algo", std::string("meanfield")));
    spec.estimation.iterations = est.value("iterations", 500);
    spec.estimation.replicates = est.value("replicates", 100);
    spec.estimation.zeta = est.value("zeta", 0.05);
    spec.estimation.p_alloc = est.value("p_alloc", 0.5);
    spec.estimation.mc_samples = est.value("mc_samples", 1000);
    spec.estimation.ci_fatten = est.value("ci_fatten", 0.0);
    spec.estimation.force_full_iterations =
        est.value("force_full_iterations", false);
    spec.estimation.workers = est.value("workers", 0);
  }
  spec.fit_propensity = j.value("fit_propensity", false);
  spec.seed = j.value("seed", static_cast<std::uint64_t>(0));
  return spec;
}

SimulationResult simulate_dataset(const ExperimentSpec& spec) {
  SimulationResult res;
  try {
    spec.params.validate();
    if (spec.params.theta.size() != spec.d)
      throw std::invalid_argument("theta dimension must equal d");
    if (spec.params.gamma.size() != 0 && spec.params.gamma.size() != spec.d)
      throw std::invalid_argument("gamma dimension must equal d");
  } catch (...) {
    rethrow_staged("simulate");
  }
  try {
    auto rng = make_rng(spec.seed, Stream::network);
    res.network =
        std::make_shared<InteractionMatrix>(build_network(spec.network, rng));
  } catch (...) {
    rethrow_staged("simulate/network");
  }
  try {
    auto rng = make_rng(spec.seed, Stream::covariates);
    res.data.x = sample_covariates(spec.network.n, spec.d, spec.cov, rng);
  } catch (...) {
    rethrow_staged("simulate/covariates");
  }
  try {
    auto rng = make_rng(spec.seed, Stream::treatment);
    Eigen::VectorXd gamma = spec.params.gamma.size() == 0
                                ? Eigen::VectorXd::Zero(spec.d)
                                : spec.params.gamma;
    PropensityModel pm(res.network, gamma);
    res.data.t = gibbs_sample_treatment(pm, res.data.x, spec.gibbs.sweeps,
                                        spec.gibbs.burn_in, rng);
  } catch (...) {
    rethrow_staged("simulate/treatment");
  }
  try {
    auto rng = make_rng(spec.seed, Stream::outcome);
    BaseMeasure mu = spec.mu.find('{') == std::string::npos
                         ? BaseMeasure::preset(spec.mu)
                         : BaseMeasure::from_json(spec.mu);
    OutcomeModel om(res.network, spec.params.tau, spec.params.theta, mu);
    res.data.y = gibbs_sample_outcome(om, res.data.t, res.data.x,
                                      spec.gibbs.sweeps, spec.gibbs.burn_in, rng);
  } catch (...) {
    rethrow_staged("simulate/outcome");
  }
  return res;
}

ExperimentReport run_experiment(const ExperimentSpec& spec) {
  auto t_total = std::chrono::steady_clock::now();
  ExperimentReport rep;
  rep.spec = spec;

  auto t0 = std::chrono::steady_clock::now();
  SimulationResult sim = simulate_dataset(spec);
  rep.data = sim.data;
  rep.diag = diagnostics(*sim.network);
  rep.timing.simulate = seconds_since(t0);

  BaseMeasure mu = spec.mu.find('{') == std::string::npos
                       ? BaseMeasure::preset(spec.mu)
                       : BaseMeasure::from_json(spec.mu);

  t0 = std::chrono::steady_clock::now();
  try {
    FitOptions fopt;
    fopt.box_b = spec.params.box_b;
    fopt.box_m = spec.params.box_m;
    rep.outcome_fit = fit_outcome(rep.data, *sim.network, mu, fopt);
    if (spec.fit_propensity)
      rep.propensity_fit = fit_propensity(rep.data, *sim.network, fopt);
  } catch (...) {
    rethrow_staged("fit");
  }
  rep.timing.fit = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  try {
    rep.estimate = replicate_effects(sim.network, mu, rep.outcome_fit.params.tau,
                                     rep.outcome_fit.params.theta, spec.cov,
                                     spec.estimation, spec.seed);
  } catch (...) {
    rethrow_staged("estimate");
  }
  rep.timing.estimate = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  try {
    rep.truth = oracle_truth(sim.network, mu, spec.params.tau, spec.params.theta,
                             spec.cov, spec.estimation, spec.seed);
  } catch (...) {
    rethrow_staged("truth");
  }
  rep.timing.truth = seconds_since(t0);
  rep.timing.total = seconds_since(t_total);
  return rep;
}

std::string estimate_to_json(const EffectEstimate& e) {
  return estimate_to_json_obj(e).dump(2);
}

std::string report_to_json(const ExperimentReport& report) {
  json j;
  j["spec"] = json::parse(experiment_spec_to_json(report.spec));
  json diag;
  diag["op_norm"] = report.diag.op_norm;
  diag["trace_square_over_n"] = report.diag.trace_square_over_n;
  diag["high_temperature"] = report.diag.high_temperature;
  diag["mean_field_ok"] = report.diag.mean_field_ok;
  diag["high_temp_threshold"] = report.diag.high_temp_threshold;
  diag["mean_field_threshold"] = report.diag.mean_field_threshold;
  diag["power_iteration_converged"] = report.diag.power_iteration_converged;
  j["diagnostics"] = diag;
  json data;
  data["y"] = to_vec(report.data.y);
  data["t"] = to_vec(report.data.t);
  std::vector<std::vector<double>> xrows(report.data.n());
  for (int i = 0; i < report.data.n(); ++i) {
    xrows[i].resize(report.data.d());
    for (int c = 0; c < report.data.d(); ++c) xrows[i][c] = report.data.x(i, c);
  }
  data["x"] = xrows;
  j["data"] = data;
  j["outcome_fit"] = fit_to_json(report.outcome_fit);
  if (report.propensity_fit)
    j["propensity_fit"] = fit_to_json(*report.propensity_fit);
  j["estimate"] = estimate_to_json_obj(report.estimate);
  j["truth"] = estimate_to_json_obj(report.truth);
  json timing;
  timing["simulate"] = report.timing.simulate;
  timing["fit"] = report.timing.fit;
  timing["estimate"] = report.timing.estimate;
  timing["truth"] = report.timing.truth;
  timing["total"] = report.timing.total;
  j["timing"] = timing;
  return j.dump(2);
}

std::string report_csv_rows(const ExperimentReport& report, bool with_header) {
  std::string label = report.spec.label;
  if (label.empty()) label = "n=" + std::to_string(report.spec.network.n);
  char buf[256];
  std::string out;
  if (with_header) out += "label,effect,truth,estimate,ci_lo,ci_hi,runtime_s\n";
  std::snprintf(buf, sizeof buf, "%s,direct,%.6g,%.6g,%.6g,%.6g,%.3f\n",
                label.c_str(), report.truth.de, report.estimate.de,
                report.estimate.de_ci.first, report.estimate.de_ci.second,
                report.timing.total);
  out += buf;
  std::snprintf(buf, sizeof buf, "%s,indirect,%.6g,%.6g,%.6g,%.6g,%.3f\n",
                label.c_str(), report.truth.ie, report.estimate.ie,
                report.estimate.ie_ci.first, report.estimate.ie_ci.second,
                report.timing.total);
  out += buf;
  return out;
}

}  // namespace netcausal
