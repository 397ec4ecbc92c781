#include "netcausal/amp.hpp"

#include <cmath>
#include <stdexcept>

namespace netcausal {

FixedPoint solve_fixed_point(const BaseMeasure& mu, double tau,
                             const Eigen::VectorXd& theta,
                             const CovariateDist& cov, double beta,
                             AllocationVariant variant,
                             const FixedPointOptions& opt, std::mt19937_64& rng,
                             double p_alloc) {
  if (opt.mc_samples < 1)
    throw std::invalid_argument("fixed point: mc_samples must be >= 1");
  if (!(p_alloc > 0.0 && p_alloc < 1.0))
    throw std::invalid_argument("fixed point: allocation p must lie in (0,1)");
  if (opt.init_q < 0.0 || opt.init_sigma2 < 0.0)
    throw std::invalid_argument("fixed point: initialization must be nonnegative");

  const int mc = opt.mc_samples;
  const int d = static_cast<int>(theta.size());
  // frozen common-random-numbers sample
  Eigen::VectorXd f(mc);  // tau T + theta' X
  Eigen::VectorXd g(mc);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int j = 0; j < mc; ++j) {
    double field;
    if (variant == AllocationVariant::treated_random)
      field = tau * (coin(rng) < p_alloc ? 1.0 : -1.0);
    else
      field = -tau;
    Eigen::MatrixXd xj = sample_covariates(1, d, cov, rng);
    field += (xj * theta)(0);
    f[j] = field;
    g[j] = gauss(rng);
  }

  FixedPoint fp;
  fp.mc_samples = mc;
  double q = opt.init_q, s2 = opt.init_sigma2;
  for (int it = 0; it < opt.max_iter; ++it) {
    const double noise = beta * std::sqrt(q);
    const double lam2 = beta * beta * s2;
    double q_next = 0.0, s2_next = 0.0;
    for (int j = 0; j < mc; ++j) {
      TiltParams lam{f[j] + noise * g[j], lam2};
      double m = mu.alpha_prime(lam);
      q_next += m * m;
      s2_next += mu.alpha_second(lam);
    }
    q_next /= mc;
    s2_next /= mc;
    double delta = std::max(std::abs(q_next - q), std::abs(s2_next - s2));
    q = q_next;
    s2 = s2_next;
    fp.iterations = it + 1;
    if (delta < opt.tol) {
      fp.converged = true;
      break;
    }
  }
  fp.q = q;
  fp.sigma2 = s2;
  return fp;
}

namespace {

Eigen::VectorXd amp_field(double tau, const Eigen::VectorXd& theta,
                          const Eigen::VectorXd& t_bar,
                          const Eigen::MatrixXd& x_bar,
                          AllocationVariant variant) {
  const int n = static_cast<int>(t_bar.size());
  if (x_bar.rows() != n)
    throw std::invalid_argument("amp: t/x row count mismatch");
  if (x_bar.cols() != theta.size())
    throw std::invalid_argument("amp: theta length must equal covariate dim");
  if (variant == AllocationVariant::treated_random)
    return tau * t_bar + x_bar * theta;
  return (-tau) * Eigen::VectorXd::Ones(n) + x_bar * theta;
}

}  // namespace

AmpState amp_iterate(const Eigen::MatrixXd& g, const BaseMeasure& mu,
                     double tau, const Eigen::VectorXd& theta,
                     const Eigen::VectorXd& t_bar, const Eigen::MatrixXd& x_bar,
                     double beta, const FixedPoint& fp, int iterations,
                     AllocationVariant variant) {
  if (iterations < 2)
    throw std::invalid_argument("amp: need at least 2 iterations");
  const int n = static_cast<int>(g.rows());
  if (g.cols() != n || t_bar.size() != n)
    throw std::invalid_argument("amp: dimension mismatch");
  const Eigen::VectorXd h = amp_field(tau, theta, t_bar, x_bar, variant);
  const double lam2 = beta * beta * fp.sigma2;

  AmpState st;
  st.u_prev = Eigen::VectorXd::Zero(n);                      // u^[1]
  st.u = std::sqrt(fp.q) * (g * Eigen::VectorXd::Ones(n));   // u^[2]
  st.iterations = 2;
  for (int k = 2; k < iterations; ++k) {
    Eigen::VectorXd z = mu.alpha_prime(beta * st.u + h, lam2);
    st.onsager = beta / n * mu.alpha_second(beta * st.u + h, lam2).sum();
    Eigen::VectorXd z_prev = mu.alpha_prime(beta * st.u_prev + h, lam2);
    Eigen::VectorXd u_next = g * z - st.onsager * z_prev;
    if (!u_next.allFinite())
      throw std::runtime_error("amp: non-finite iterate at step " +
                               std::to_string(k + 1));
    st.u_prev = std::move(st.u);
    st.u = std::move(u_next);
    st.iterations = k + 1;
  }
  st.m = mu.alpha_prime(beta * st.u + h, lam2);
  st.tap_residual = tap_residual(st.m, g, mu, h, beta, fp.sigma2);
  return st;
}

double tap_residual(const Eigen::VectorXd& m, const Eigen::MatrixXd& g,
                    const BaseMeasure& mu, const Eigen::VectorXd& h,
                    double beta, double sigma2) {
  const int n = static_cast<int>(m.size());
  if (g.rows() != n || g.cols() != n || h.size() != n)
    throw std::invalid_argument("tap: dimension mismatch");
  const double lam2 = beta * beta * sigma2;
  Eigen::VectorXd arg = beta * (g * m) + h - lam2 * m;
  Eigen::VectorXd mapped = mu.alpha_prime(arg, lam2);
  return (m - mapped).norm() / std::sqrt(static_cast<double>(n));
}

AmpEffects estimate_effects_amp(const Eigen::MatrixXd& g, const BaseMeasure& mu,
                                double tau, const Eigen::VectorXd& theta,
                                const Eigen::VectorXd& t_bar,
                                const Eigen::MatrixXd& x_bar, double beta,
                                const FixedPoint& fp_treated,
                                const FixedPoint& fp_control, int iterations,
                                double p_alloc) {
  AmpEffects out;
  out.fp_treated = fp_treated;
  out.fp_control = fp_control;
  out.treated = amp_iterate(g, mu, tau, theta, t_bar, x_bar, beta, fp_treated,
                            iterations, AllocationVariant::treated_random);
  out.control = amp_iterate(g, mu, tau, theta, t_bar, x_bar, beta, fp_control,
                            iterations, AllocationVariant::all_control);
  out.effects = plug_in_effects(out.treated.m, out.control.m, t_bar, p_alloc);
  return out;
}

AmpEffects estimate_effects_amp(const Eigen::MatrixXd& g, const BaseMeasure& mu,
                                double tau, const Eigen::VectorXd& theta,
                                const CovariateDist& cov,
                                const Eigen::VectorXd& t_bar,
                                const Eigen::MatrixXd& x_bar, double beta,
                                const FixedPointOptions& fp_opt,
                                std::mt19937_64& rng, int iterations,
                                double p_alloc) {
  FixedPoint fpt =
      solve_fixed_point(mu, tau, theta, cov, beta,
                        AllocationVariant::treated_random, fp_opt, rng, p_alloc);
  FixedPoint fpc = solve_fixed_point(mu, tau, theta, cov, beta,
                                     AllocationVariant::all_control, fp_opt, rng,
                                     p_alloc);
  if (!fpt.converged || !fpc.converged)
    throw std::runtime_error("amp: fixed point iteration did not converge");
  return estimate_effects_amp(g, mu, tau, theta, t_bar, x_bar, beta, fpt, fpc,
                              iterations, p_alloc);
}

}  // namespace netcausal
