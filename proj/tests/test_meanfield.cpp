#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "netcausal/meanfield.hpp"

using namespace netcausal;

namespace {

std::shared_ptr<const InteractionMatrix> shared_complete(int n, double beta) {
  return std::make_shared<InteractionMatrix>(complete_graph(n, beta));
}

Eigen::VectorXd random_signs(int n, std::mt19937_64& rng) {
  Eigen::VectorXd t(n);
  for (int i = 0; i < n; ++i) t[i] = (rng() & 1) ? 1.0 : -1.0;
  return t;
}

}  // namespace

TEST_CASE("decoupled sites have closed-form effects") {
  // A = 0, theta = 0, Rademacher base: u_i = tanh(tau t_i) so the direct
  // effect is exactly 2 tanh(tau) and the indirect effect is
  // tanh(tau) * mean(t) for every draw.
  const int n = 50;
  const double tau = 0.5;
  auto a = shared_complete(n, 0.0);
  OutcomeModel m(a, tau, Eigen::VectorXd::Zero(1), BaseMeasure::rademacher());
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 5; ++rep) {
    Eigen::VectorXd t = random_signs(n, rng);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, 1);
    MfEffects r = estimate_effects_mf(m, t, x);
    CHECK(r.effects.de == doctest::Approx(2.0 * std::tanh(tau)).epsilon(1e-12));
    CHECK(r.effects.ie ==
          doctest::Approx(std::tanh(tau) * t.mean()).epsilon(1e-12));
    CHECK(r.state.treated.converged);
    CHECK(r.state.control.converged);
    // both chains converge in two passes: the second step is a no-op
    CHECK(r.state.treated.iterations <= 2);
  }
}

TEST_CASE("fixed point satisfies the self-consistency equation") {
  const int n = 60;
  auto a = shared_complete(n, 0.3);
  Eigen::VectorXd theta(1);
  theta << 2.0;
  OutcomeModel m(a, 0.5, theta, BaseMeasure::rademacher());
  std::mt19937_64 rng(22);
  Eigen::VectorXd t = random_signs(n, rng);
  Eigen::MatrixXd x(n, 1);
  std::uniform_real_distribution<double> u01(-1, 1);
  for (int i = 0; i < n; ++i) x(i, 0) = u01(rng);

  MfOptions opt;
  MfIterationResult r = mf_iterate(m, t, x, opt);
  CHECK(r.converged);
  CHECK(r.residual <= opt.tol);
  Eigen::VectorXd field = a->multiply(r.u) + 0.5 * t + x * theta;
  Eigen::VectorXd mapped = m.mu.alpha_prime(field, 0.0);
  CHECK((mapped - r.u).norm() / std::sqrt(double(n)) < 1e-7);
  CHECK(r.u.minCoeff() >= -1.0);
  CHECK(r.u.maxCoeff() <= 1.0);
}

TEST_CASE("iteration count respects the contraction rate") {
  // ||A|| < 1 and |alpha'' | <= 1 make the map a ||A||-contraction, so the
  // iteration count is bounded by log(tol) / log(||A||) plus slack.
  const int n = 100;
  const double beta = 0.5;
  auto a = shared_complete(n, beta);
  OutcomeModel m(a, 0.5, Eigen::VectorXd::Zero(1), BaseMeasure::rademacher());
  std::mt19937_64 rng(23);
  Eigen::VectorXd t = random_signs(n, rng);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, 1);
  MfOptions opt;
  MfIterationResult r = mf_iterate(m, t, x, opt);
  double rate = a->operator_norm();
  int bound = static_cast<int>(std::ceil(std::log(opt.tol) / std::log(rate))) + 50;
  CHECK(r.converged);
  CHECK(r.iterations <= bound);
}

TEST_CASE("forced full iterations run to the cap") {
  const int n = 30;
  auto a = shared_complete(n, 0.3);
  OutcomeModel m(a, 0.5, Eigen::VectorXd::Zero(1), BaseMeasure::rademacher());
  std::mt19937_64 rng(24);
  Eigen::VectorXd t = random_signs(n, rng);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, 1);

  MfOptions forced;
  forced.max_iter = 137;
  forced.force_full_iterations = true;
  MfIterationResult rf = mf_iterate(m, t, x, forced);
  CHECK(rf.iterations == 137);
  CHECK(rf.converged);  // residual still below tol at the end

  MfOptions early;
  early.max_iter = 137;
  MfIterationResult re = mf_iterate(m, t, x, early);
  CHECK(re.iterations < 137);
  // the forced run lands on the same fixed point
  CHECK((rf.u - re.u).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("non-convergence is reported when the cap is too small") {
  const int n = 40;
  auto a = shared_complete(n, 0.9);
  OutcomeModel m(a, 0.5, Eigen::VectorXd::Zero(1), BaseMeasure::rademacher());
  std::mt19937_64 rng(25);
  Eigen::VectorXd t = random_signs(n, rng);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, 1);
  MfOptions opt;
  opt.max_iter = 2;
  MfIterationResult r = mf_iterate(m, t, x, opt);
  CHECK(!r.converged);
  CHECK(r.iterations == 2);
  CHECK(r.residual > opt.tol);
}

TEST_CASE("site means track exact enumeration on a small graph") {
  // n = 8 complete graph at beta = 0.3: Tr(A^2)/n ~ 0.01, so naive mean
  // field should land close to the exact conditional means.
  const int n = 8;
  auto a = shared_complete(n, 0.3);
  Eigen::VectorXd theta(1);
  theta << 2.0;
  OutcomeModel m(a, 0.5, theta, BaseMeasure::rademacher());
  std::mt19937_64 rng(26);
  Eigen::VectorXd t = random_signs(n, rng);
  Eigen::MatrixXd x(n, 1);
  std::uniform_real_distribution<double> u01(-1, 1);
  for (int i = 0; i < n; ++i) x(i, 0) = u01(rng);

  auto exact = brute_force_means(m, t, x);
  MfIterationResult r = mf_iterate(m, t, x, {});
  double rms = (r.u - exact.means).norm() / std::sqrt(double(n));
  CHECK(rms < 0.1);
}

TEST_CASE("control chain ignores the treatment draw") {
  const int n = 40;
  auto a = shared_complete(n, 0.3);
  OutcomeModel m(a, 0.5, Eigen::VectorXd::Zero(1), BaseMeasure::rademacher());
  std::mt19937_64 rng(27);
  Eigen::VectorXd t1 = random_signs(n, rng);
  Eigen::VectorXd t2 = random_signs(n, rng);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, 1);
  MfEffects r1 = estimate_effects_mf(m, t1, x);
  MfEffects r2 = estimate_effects_mf(m, t2, x);
  CHECK(r1.state.control.u == r2.state.control.u);
}

TEST_CASE("uniform base measure stays inside the open cube") {
  const int n = 30;
  auto a = shared_complete(n, 0.4);
  OutcomeModel m(a, 0.8, Eigen::VectorXd::Zero(1), BaseMeasure::uniform());
  std::mt19937_64 rng(28);
  Eigen::VectorXd t = random_signs(n, rng);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, 1);
  MfIterationResult r = mf_iterate(m, t, x, {});
  CHECK(r.converged);
  CHECK(r.u.cwiseAbs().maxCoeff() < 1.0);  // uniform tilted mean never hits +-1
}
