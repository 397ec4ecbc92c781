#include "netcausal/meanfield.hpp"

#include <cmath>
#include <stdexcept>

namespace netcausal {

MfIterationResult mf_iterate(const OutcomeModel& m, const Eigen::VectorXd& t,
                             const Eigen::MatrixXd& x, const MfOptions& opt) {
  if (opt.max_iter < 1)
    throw std::invalid_argument("meanfield: max_iter must be >= 1");
  if (!(opt.tol >= 0.0))
    throw std::invalid_argument("meanfield: tol must be >= 0");
  const int n = m.n();
  if (t.size() != n || x.rows() != n)
    throw std::invalid_argument("meanfield: t/x row count must equal n");
  if (x.cols() != m.theta.size())
    throw std::invalid_argument("meanfield: theta length must equal covariate dim");

  const Eigen::VectorXd b = m.tau * t + x * m.theta;
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));

  MfIterationResult res;
  res.u = Eigen::VectorXd::Zero(n);
  for (int it = 0; it < opt.max_iter; ++it) {
    Eigen::VectorXd lam = m.a->multiply(res.u) + b;
    Eigen::VectorXd next = m.mu.alpha_prime(lam, 0.0);
    if (!next.allFinite())
      throw std::runtime_error("meanfield: non-finite iterate at iteration " +
                               std::to_string(it + 1));
    res.residual = (next - res.u).norm() * inv_sqrt_n;
    res.u = std::move(next);
    res.iterations = it + 1;
    if (res.residual <= opt.tol) {
      res.converged = true;
      if (!opt.force_full_iterations) break;
    }
  }
  return res;
}

MfEffects estimate_effects_mf(const OutcomeModel& m,
                              const Eigen::VectorXd& t_bar,
                              const Eigen::MatrixXd& x_bar,
                              const MfOptions& opt, double p_alloc) {
  MfEffects out;
  out.state.treated = mf_iterate(m, t_bar, x_bar, opt);
  const Eigen::VectorXd all_control = Eigen::VectorXd::Constant(m.n(), -1.0);
  out.state.control = mf_iterate(m, all_control, x_bar, opt);
  out.effects = plug_in_effects(out.state.treated.u, out.state.control.u,
                                t_bar, p_alloc);
  return out;
}

}  // namespace netcausal
