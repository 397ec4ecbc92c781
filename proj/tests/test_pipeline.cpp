#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <string>

#include "netcausal/pipeline.hpp"

using namespace netcausal;

namespace {

std::string strip_timing(const std::string& json) {
  // remove the "timing" object (the only wall-clock-dependent field)
  auto pos = json.find("\"timing\"");
  if (pos == std::string::npos) return json;
  auto open = json.find('{', pos);
  int depth = 0;
  size_t end = open;
  for (size_t i = open; i < json.size(); ++i) {
    if (json[i] == '{') ++depth;
    if (json[i] == '}') --depth;
    if (depth == 0) {
      end = i;
      break;
    }
  }
  return json.substr(0, pos) + json.substr(end + 1);
}

ExperimentSpec small_spec(std::uint64_t seed) {
  ExperimentSpec spec;
  spec.network.family = GraphFamily::complete;
  spec.network.n = 60;
  spec.network.beta = 0.3;
  spec.d = 1;
  spec.params.tau = 0.5;
  spec.params.theta = Eigen::VectorXd::Zero(1);
  spec.params.theta << 2.0;
  spec.params.gamma = Eigen::VectorXd::Zero(1);
  spec.gibbs = {100, 30};
  spec.estimation.replicates = 20;
  spec.estimation.iterations = 200;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST_CASE("quantile interval matches the hand-computed convention") {
  // For samples 1..100 at level 0.95 the interpolated ranks are
  // 1 + 99*0.025 = 3.475 and 1 + 99*0.975 = 97.525, giving 3.475 / 97.525.
  std::vector<double> s;
  for (int i = 1; i <= 100; ++i) s.push_back(i);
  auto ci = quantile_ci(s, 0.05);
  CHECK(ci.first == doctest::Approx(3.475).epsilon(1e-12));
  CHECK(ci.second == doctest::Approx(97.525).epsilon(1e-12));
  // order of the input must not matter
  std::reverse(s.begin(), s.end());
  auto ci2 = quantile_ci(s, 0.05);
  CHECK(ci2.first == ci.first);
  CHECK(ci2.second == ci.second);
}

TEST_CASE("quantile interval widens as the level rises") {
  std::vector<double> s;
  std::mt19937_64 rng(61);
  std::normal_distribution<double> nd(0, 1);
  for (int i = 0; i < 500; ++i) s.push_back(nd(rng));
  auto narrow = quantile_ci(s, 0.50);
  auto mid = quantile_ci(s, 0.10);
  auto wide = quantile_ci(s, 0.01);
  CHECK(narrow.first >= mid.first);
  CHECK(mid.first >= wide.first);
  CHECK(narrow.second <= mid.second);
  CHECK(mid.second <= wide.second);
  // single sample degenerates to a point
  auto pt = quantile_ci({2.5}, 0.05);
  CHECK(pt.first == 2.5);
  CHECK(pt.second == 2.5);
}

TEST_CASE("replicate estimates are scheduling-independent") {
  auto a = std::make_shared<InteractionMatrix>(complete_graph(80, 0.3));
  Eigen::VectorXd theta(1);
  theta << 2.0;
  EstimationOptions opt;
  opt.replicates = 16;
  opt.iterations = 300;
  EstimationOptions serial = opt;
  serial.workers = 1;
  EstimationOptions wide = opt;
  wide.workers = 8;
  auto r1 = replicate_effects(a, BaseMeasure::rademacher(), 0.5, theta,
                              CovariateDist::uniform(), serial, 777);
  auto r2 = replicate_effects(a, BaseMeasure::rademacher(), 0.5, theta,
                              CovariateDist::uniform(), wide, 777);
  CHECK(r1.de == r2.de);
  CHECK(r1.ie == r2.ie);
  for (int j = 0; j < 16; ++j) {
    CHECK(r1.de_replicates[j] == r2.de_replicates[j]);
    CHECK(r1.ie_replicates[j] == r2.ie_replicates[j]);
  }
  CHECK(r1.de_ci == r2.de_ci);
}

TEST_CASE("oracle truth is the same computation under a flag") {
  auto a = std::make_shared<InteractionMatrix>(complete_graph(50, 0.3));
  Eigen::VectorXd theta(1);
  theta << 2.0;
  EstimationOptions opt;
  opt.replicates = 8;
  opt.iterations = 150;
  auto est = replicate_effects(a, BaseMeasure::rademacher(), 0.5, theta,
                               CovariateDist::uniform(), opt, 31);
  auto tru = oracle_truth(a, BaseMeasure::rademacher(), 0.5, theta,
                          CovariateDist::uniform(), opt, 31);
  CHECK(est.de == tru.de);
  CHECK(est.ie == tru.ie);
  CHECK(!est.oracle);
  CHECK(tru.oracle);
}

TEST_CASE("amp path solves fixed points once and reuses them") {
  std::mt19937_64 rng(62);
  auto a = std::make_shared<InteractionMatrix>(gaussian_sk(60, 0.25, rng));
  Eigen::VectorXd theta(1);
  theta << 2.0;
  EstimationOptions opt;
  opt.algo = Algorithm::amp;
  opt.replicates = 6;
  opt.iterations = 40;
  opt.mc_samples = 500;
  auto r = replicate_effects(a, BaseMeasure::rademacher(), 0.5, theta,
                             CovariateDist::uniform(), opt, 99);
  REQUIRE(r.fp_treated.has_value());
  REQUIRE(r.fp_control.has_value());
  CHECK(r.fp_treated->converged);
  CHECK(r.fp_control->converged);
  CHECK(r.fp_treated->mc_samples == 500);
  CHECK(std::isfinite(r.de));
  CHECK(std::isfinite(r.ie));
  CHECK(int(r.de_replicates.size()) == 6);

  // same seed, same answer (fixed points use dedicated substreams)
  auto r2 = replicate_effects(a, BaseMeasure::rademacher(), 0.5, theta,
                              CovariateDist::uniform(), opt, 99);
  CHECK(r2.de == r.de);
  CHECK(r2.fp_treated->q == r.fp_treated->q);
}

TEST_CASE("fattened intervals contain the plain ones") {
  auto a = std::make_shared<InteractionMatrix>(complete_graph(40, 0.3));
  Eigen::VectorXd theta(1);
  theta << 2.0;
  EstimationOptions plain;
  plain.replicates = 12;
  plain.iterations = 150;
  EstimationOptions fat = plain;
  fat.ci_fatten = 0.02;
  auto r1 = replicate_effects(a, BaseMeasure::rademacher(), 0.5, theta,
                              CovariateDist::uniform(), plain, 5);
  auto r2 = replicate_effects(a, BaseMeasure::rademacher(), 0.5, theta,
                              CovariateDist::uniform(), fat, 5);
  CHECK(r2.de_ci.first == doctest::Approx(r1.de_ci.first - 0.02).epsilon(1e-12));
  CHECK(r2.de_ci.second ==
        doctest::Approx(r1.de_ci.second + 0.02).epsilon(1e-12));
}

TEST_CASE("spec json round trip") {
  ExperimentSpec spec = small_spec(12345);
  spec.label = "demo";
  spec.network.family = GraphFamily::erdos_renyi;
  spec.network.p = 0.2;
  spec.estimation.algo = Algorithm::amp;
  spec.estimation.zeta = 0.10;
  spec.cov = CovariateDist::rademacher();
  spec.fit_propensity = true;
  std::string text = experiment_spec_to_json(spec);
  ExperimentSpec back = experiment_spec_from_json(text);
  CHECK(back.label == spec.label);
  CHECK(back.network.family == spec.network.family);
  CHECK(back.network.n == spec.network.n);
  CHECK(back.network.p == spec.network.p);
  CHECK(back.d == spec.d);
  CHECK(back.mu == spec.mu);
  CHECK(back.params.tau == spec.params.tau);
  CHECK(back.params.theta == spec.params.theta);
  CHECK(back.estimation.algo == spec.estimation.algo);
  CHECK(back.estimation.zeta == spec.estimation.zeta);
  CHECK(back.estimation.replicates == spec.estimation.replicates);
  CHECK(back.gibbs.sweeps == spec.gibbs.sweeps);
  CHECK(back.fit_propensity == spec.fit_propensity);
  CHECK(back.seed == spec.seed);

  // dimension mismatches are rejected
  ExperimentSpec bad = spec;
  bad.params.theta = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(
      experiment_spec_from_json(experiment_spec_to_json(bad)),
      std::invalid_argument);
}

TEST_CASE("simulated data respects the support constraints") {
  ExperimentSpec spec = small_spec(7);
  SimulationResult sim = simulate_dataset(spec);
  CHECK(sim.network->n() == 60);
  sim.data.validate();
  CHECK(sim.data.n() == 60);
  CHECK(sim.data.d() == 1);
  // rademacher base puts outcomes on +-1
  CHECK((sim.data.y.array().abs() == 1.0).all());
  // same seed, same dataset
  SimulationResult sim2 = simulate_dataset(spec);
  CHECK(sim2.data.y == sim.data.y);
  CHECK(sim2.data.t == sim.data.t);
  CHECK(sim2.data.x == sim.data.x);
  // different seed, different draw
  ExperimentSpec other = small_spec(8);
  SimulationResult sim3 = simulate_dataset(other);
  CHECK(sim3.data.y != sim.data.y);
}

TEST_CASE("full experiment report is reproducible net of timing") {
  ExperimentSpec spec = small_spec(4242);
  ExperimentReport r1 = run_experiment(spec);
  ExperimentReport r2 = run_experiment(spec);
  CHECK(strip_timing(report_to_json(r1)) == strip_timing(report_to_json(r2)));
  // estimates and truth share replicate seeds: same k, finite values
  CHECK(int(r1.estimate.de_replicates.size()) ==
        spec.estimation.replicates);
  CHECK(int(r1.truth.de_replicates.size()) == spec.estimation.replicates);
  CHECK(r1.outcome_fit.converged);
  CHECK(std::isfinite(r1.estimate.de));
  CHECK(r1.timing.total > 0.0);
  // csv rows carry both effects
  std::string csv = report_csv_rows(r1);
  CHECK(csv.find("direct") != std::string::npos);
  CHECK(csv.find("indirect") != std::string::npos);
  CHECK(csv.find("n=60") != std::string::npos);
}

TEST_CASE("experiment truth lands inside the fattened interval") {
  // Coverage smoke test: with the estimate built at fitted parameters and
  // the truth at the generating ones, the slightly fattened interval should
  // cover the truth in nearly every run.
  int covered_de = 0, covered_ie = 0;
  const int runs = 10;
  for (int i = 0; i < runs; ++i) {
    ExperimentSpec spec = small_spec(1000 + i);
    spec.network.n = 100;
    spec.estimation.replicates = 20;
    spec.estimation.ci_fatten = 0.02;
    ExperimentReport r = run_experiment(spec);
    if (r.estimate.de_ci.first <= r.truth.de &&
        r.truth.de <= r.estimate.de_ci.second)
      ++covered_de;
    if (r.estimate.ie_ci.first <= r.truth.ie &&
        r.truth.ie <= r.estimate.ie_ci.second)
      ++covered_ie;
  }
  CHECK(covered_de >= 7);
  CHECK(covered_ie >= 7);
}

TEST_CASE("unbalanced allocation changes the weights continuously") {
  auto a = std::make_shared<InteractionMatrix>(complete_graph(50, 0.3));
  Eigen::VectorXd theta(1);
  theta << 2.0;
  EstimationOptions opt;
  opt.replicates = 10;
  opt.iterations = 150;
  EstimationOptions near_half = opt;
  near_half.p_alloc = 0.5 + 1e-9;
  auto at_half = replicate_effects(a, BaseMeasure::rademacher(), 0.5, theta,
                                   CovariateDist::uniform(), opt, 55);
  auto near = replicate_effects(a, BaseMeasure::rademacher(), 0.5, theta,
                                CovariateDist::uniform(), near_half, 55);
  CHECK(near.de == doctest::Approx(at_half.de).epsilon(1e-6));
  CHECK(near.ie == doctest::Approx(at_half.ie).epsilon(1e-6));
  // a genuinely unbalanced allocation shifts the draw and the weights
  EstimationOptions tilted = opt;
  tilted.p_alloc = 0.8;
  auto skew = replicate_effects(a, BaseMeasure::rademacher(), 0.5, theta,
                                CovariateDist::uniform(), tilted, 55);
  CHECK(std::isfinite(skew.de));
  CHECK(skew.de != at_half.de);
}

TEST_CASE("validation failures carry a stage prefix") {
  ExperimentSpec spec = small_spec(1);
  spec.params.tau = 3.0;  // outside the box
  CHECK_THROWS_WITH_AS(run_experiment(spec),
                       doctest::Contains("simulate"), std::invalid_argument);
  ExperimentSpec bad_mu = small_spec(2);
  bad_mu.mu = "exotic";
  CHECK_THROWS_AS(run_experiment(bad_mu), std::invalid_argument);
}

TEST_CASE("network spec builder covers every family") {
  std::mt19937_64 rng(63);
  NetworkSpec s;
  s.n = 40;
  s.family = GraphFamily::complete;
  CHECK(build_network(s, rng).family() == GraphFamily::complete);
  s.family = GraphFamily::regular;
  s.degree = 6;
  CHECK(build_network(s, rng).family() == GraphFamily::regular);
  s.family = GraphFamily::erdos_renyi;
  s.p = 0.3;
  CHECK(build_network(s, rng).family() == GraphFamily::erdos_renyi);
  s.family = GraphFamily::graphon;
  s.rho = 0.5;
  s.kernel = "min";
  CHECK(build_network(s, rng).family() == GraphFamily::graphon);
  s.family = GraphFamily::gaussian;
  CHECK(build_network(s, rng).family() == GraphFamily::gaussian);
  CHECK_THROWS_AS(graphon_kernel("nope"), std::invalid_argument);

  CHECK(algorithm_from_name("amp") == Algorithm::amp);
  CHECK(algorithm_from_name("meanfield") == Algorithm::meanfield);
  CHECK(algorithm_from_name("mf") == Algorithm::meanfield);
  CHECK_THROWS_AS(algorithm_from_name("other"), std::invalid_argument);
  CHECK(algorithm_name(Algorithm::amp) == "amp");
}

TEST_CASE("estimate json carries the replicate summaries") {
  auto a = std::make_shared<InteractionMatrix>(complete_graph(30, 0.3));
  Eigen::VectorXd theta(1);
  theta << 2.0;
  EstimationOptions opt;
  opt.replicates = 5;
  opt.iterations = 100;
  auto r = replicate_effects(a, BaseMeasure::rademacher(), 0.5, theta,
                             CovariateDist::uniform(), opt, 11);
  std::string j = estimate_to_json(r);
  CHECK(j.find("\"de\"") != std::string::npos);
  CHECK(j.find("\"ie\"") != std::string::npos);
  CHECK(j.find("\"ci\"") != std::string::npos);
  CHECK(j.find("\"replicates\"") != std::string::npos);
  CHECK(j.find("\"algo\"") != std::string::npos);
  CHECK(j.find("\"seed\"") != std::string::npos);
}
