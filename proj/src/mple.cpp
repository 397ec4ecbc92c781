#include "netcausal/mple.hpp"

#include <cmath>
#include <stdexcept>

namespace netcausal {

namespace {

// Generic single-parameter-block pseudo-likelihood: response r_i, fixed
// offset o_i, design row z_i, coefficient vector c:
//   l(c) = (1/n) sum_i [ r_i (o_i + c' z_i) - alpha(o_i + c' z_i, 0) ].
struct PlProblem {
  const Eigen::VectorXd& r;
  const Eigen::VectorXd& o;
  const Eigen::MatrixXd& z;  // n x p
  const BaseMeasure& mu;

  int n() const { return static_cast<int>(r.size()); }
  int p() const { return static_cast<int>(z.cols()); }

  double objective(const Eigen::VectorXd& c) const {
    Eigen::VectorXd lam = o + z * c;
    double s = 0.0;
    for (int i = 0; i < n(); ++i)
      s += r[i] * lam[i] - mu.alpha({lam[i], 0.0});
    return s / n();
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& c) const {
    Eigen::VectorXd lam = o + z * c;
    Eigen::VectorXd resid = r - mu.alpha_prime(lam, 0.0);
    return z.transpose() * resid / n();
  }

  Eigen::MatrixXd neg_hessian(const Eigen::VectorXd& c) const {
    Eigen::VectorXd lam = o + z * c;
    Eigen::VectorXd w = mu.alpha_second(lam, 0.0);
    return z.transpose() * w.asDiagonal() * z / n();
  }
};

Eigen::VectorXd project_box(Eigen::VectorXd c, const Eigen::VectorXd& bound) {
  for (int j = 0; j < c.size(); ++j)
    c[j] = std::clamp(c[j], -bound[j], bound[j]);
  return c;
}

struct CoreResult {
  Eigen::VectorXd c;
  double objective = 0.0;
  double grad_norm = 0.0;
  double min_curvature = 0.0;
  int iterations = 0;
  bool converged = false;
};

CoreResult maximize(const PlProblem& prob, Eigen::VectorXd init,
                    const Eigen::VectorXd& bound, const FitOptions& opt) {
  if (opt.max_iter < 1) throw std::invalid_argument("fit: max_iter must be >= 1");
  if (!(opt.tol > 0.0)) throw std::invalid_argument("fit: tol must be positive");

  CoreResult res;
  Eigen::VectorXd c = project_box(std::move(init), bound);
  double obj = prob.objective(c);
  for (int it = 0; it < opt.max_iter; ++it) {
    res.iterations = it + 1;
    Eigen::VectorXd g = prob.gradient(c);
    res.grad_norm = g.norm();
    if (res.grad_norm <= opt.tol) {
      res.converged = true;
      break;
    }
    Eigen::MatrixXd nh = prob.neg_hessian(c);
    Eigen::VectorXd dir;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(nh);
    bool newton_ok = ldlt.info() == Eigen::Success;
    if (newton_ok) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(nh);
      double lo = es.eigenvalues().minCoeff();
      double hi = es.eigenvalues().maxCoeff();
      newton_ok = lo > 1e-12 * std::max(1.0, hi);
    }
    if (newton_ok) {
      dir = ldlt.solve(g);
      if (!dir.allFinite() || dir.dot(g) <= 0.0) newton_ok = false;
    }
    if (!newton_ok) dir = g;  // gradient-ascent fallback

    double step = 1.0;
    bool improved = false;
    while (step >= 1e-12) {
      Eigen::VectorXd c_try = project_box(c + step * dir, bound);
      double obj_try = prob.objective(c_try);
      if (obj_try > obj) {
        c = std::move(c_try);
        obj = obj_try;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) {
      // no ascent possible at machine-step resolution: stationary (possibly
      // at the box boundary)
      res.converged = true;
      break;
    }
  }
  res.c = c;
  res.objective = obj;
  Eigen::VectorXd g = prob.gradient(c);
  res.grad_norm = g.norm();
  if (res.grad_norm <= opt.tol) res.converged = true;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(prob.neg_hessian(c));
  res.min_curvature = es.eigenvalues().minCoeff();
  return res;
}

// stacked design (x_i, t_i) and offset (A y)_i for the outcome fit
void outcome_problem_parts(const Dataset& data, const InteractionMatrix& a,
                           Eigen::VectorXd& offset, Eigen::MatrixXd& design) {
  if (a.n() != data.n())
    throw std::invalid_argument("fit: matrix size must match dataset");
  offset = a.multiply(data.y);
  design.resize(data.n(), data.d() + 1);
  design.leftCols(data.d()) = data.x;
  design.col(data.d()) = data.t;
}

}  // namespace

double pl_objective(const Dataset& data, const InteractionMatrix& a,
                    const BaseMeasure& mu, double tau,
                    const Eigen::VectorXd& theta) {
  if (theta.size() != data.d())
    throw std::invalid_argument("fit: theta length must equal covariate dim");
  Eigen::VectorXd offset;
  Eigen::MatrixXd design;
  outcome_problem_parts(data, a, offset, design);
  Eigen::VectorXd c(data.d() + 1);
  c << theta, tau;
  return PlProblem{data.y, offset, design, mu}.objective(c);
}

Eigen::VectorXd pl_gradient(const Dataset& data, const InteractionMatrix& a,
                            const BaseMeasure& mu, double tau,
                            const Eigen::VectorXd& theta) {
  if (theta.size() != data.d())
    throw std::invalid_argument("fit: theta length must equal covariate dim");
  Eigen::VectorXd offset;
  Eigen::MatrixXd design;
  outcome_problem_parts(data, a, offset, design);
  Eigen::VectorXd c(data.d() + 1);
  c << theta, tau;
  return PlProblem{data.y, offset, design, mu}.gradient(c);
}

Eigen::MatrixXd pl_neg_hessian(const Dataset& data, const InteractionMatrix& a,
                               const BaseMeasure& mu, double tau,
                               const Eigen::VectorXd& theta) {
  if (theta.size() != data.d())
    throw std::invalid_argument("fit: theta length must equal covariate dim");
  Eigen::VectorXd offset;
  Eigen::MatrixXd design;
  outcome_problem_parts(data, a, offset, design);
  Eigen::VectorXd c(data.d() + 1);
  c << theta, tau;
  return PlProblem{data.y, offset, design, mu}.neg_hessian(c);
}

FitResult fit_outcome(const Dataset& data, const InteractionMatrix& a,
                      const BaseMeasure& mu, const ModelParams& init,
                      const FitOptions& opt) {
  data.validate();
  Eigen::VectorXd offset;
  Eigen::MatrixXd design;
  outcome_problem_parts(data, a, offset, design);
  const int d = data.d();
  Eigen::VectorXd c0 = Eigen::VectorXd::Zero(d + 1);
  if (init.theta.size() == d) c0.head(d) = init.theta;
  else if (init.theta.size() != 0)
    throw std::invalid_argument("fit: init theta length must equal covariate dim");
  c0[d] = init.tau;
  Eigen::VectorXd bound = Eigen::VectorXd::Constant(d + 1, opt.box_m);
  bound[d] = opt.box_b;

  CoreResult core =
      maximize(PlProblem{data.y, offset, design, mu}, c0, bound, opt);
  FitResult out;
  out.params.theta = core.c.head(d);
  out.params.tau = core.c[d];
  out.params.box_b = opt.box_b;
  out.params.box_m = opt.box_m;
  out.objective = core.objective;
  out.grad_norm = core.grad_norm;
  out.min_curvature = core.min_curvature;
  out.iterations = core.iterations;
  out.converged = core.converged;
  return out;
}

FitResult fit_outcome(const Dataset& data, const InteractionMatrix& a,
                      const BaseMeasure& mu, const FitOptions& opt) {
  ModelParams zero;
  zero.theta = Eigen::VectorXd::Zero(data.d());
  return fit_outcome(data, a, mu, zero, opt);
}

FitResult fit_propensity(const Dataset& data, const InteractionMatrix& m,
                         const Eigen::VectorXd& init_gamma,
                         const FitOptions& opt) {
  data.validate();
  if (m.n() != data.n())
    throw std::invalid_argument("fit: matrix size must match dataset");
  const int d = data.d();
  Eigen::VectorXd c0 = Eigen::VectorXd::Zero(d);
  if (init_gamma.size() == d) c0 = init_gamma;
  else if (init_gamma.size() != 0)
    throw std::invalid_argument("fit: init gamma length must equal covariate dim");
  Eigen::VectorXd offset = m.multiply(data.t);
  Eigen::VectorXd bound = Eigen::VectorXd::Constant(d, opt.box_m);
  BaseMeasure rad = BaseMeasure::rademacher();

  CoreResult core =
      maximize(PlProblem{data.t, offset, data.x, rad}, c0, bound, opt);
  FitResult out;
  out.params.gamma = core.c;
  out.params.box_b = opt.box_b;
  out.params.box_m = opt.box_m;
  out.objective = core.objective;
  out.grad_norm = core.grad_norm;
  out.min_curvature = core.min_curvature;
  out.iterations = core.iterations;
  out.converged = core.converged;
  return out;
}

FitResult fit_propensity(const Dataset& data, const InteractionMatrix& m,
                         const FitOptions& opt) {
  return fit_propensity(data, m, Eigen::VectorXd(), opt);
}

}  // namespace netcausal
