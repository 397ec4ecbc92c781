#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace netcausal {

struct EffectPair {
  double de = 0.0;
  double ie = 0.0;
};

// Plug-in direct/indirect effects from site means under the treated draw (u)
// and under all-control (u_tilde). Allocation probability p is P(t_i = +1).
// At p == 0.5 exactly this is
//   DE = (2/n) sum_i t_i u_i
//   IE = (1/n) (sum_i u_i - sum_i u_tilde_i) - DE / 2,
// otherwise the inverse-probability-weighted generalization
//   DE = (1/n) sum_i (a + b t_i) u_i,  a = (1/p - 1/(1-p))/2, b = (1/p + 1/(1-p))/2
//   IE = (1/n) sum_i [(1 - t_i) / (2(1-p))] u_i - (1/n) sum_i u_tilde_i.
// The weight (1 - t_i)/(2(1-p)) is the inverse-probability indicator of an
// untreated unit, so at p = 0.5 the general form reduces algebraically to the
// first one (the -DE/2 there is the expanded indicator). Both estimators are
// unbiased under t_i iid with P(+1) = p; the p = 0.5 branch is kept exact so
// degenerate identities hold bit-for-bit.
inline EffectPair plug_in_effects(const Eigen::VectorXd& u,
                                  const Eigen::VectorXd& u_tilde,
                                  const Eigen::VectorXd& t, double p = 0.5) {
  const auto n = u.size();
  if (u_tilde.size() != n || t.size() != n)
    throw std::invalid_argument("effects: dimension mismatch");
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("effects: allocation p must lie in (0,1)");
  EffectPair e;
  const double inv_n = 1.0 / static_cast<double>(n);
  if (p == 0.5) {
    e.de = 2.0 * inv_n * t.dot(u);
    e.ie = inv_n * (u.sum() - u_tilde.sum()) - 0.5 * e.de;
  } else {
    const double a = 0.5 * (1.0 / p - 1.0 / (1.0 - p));
    const double b = 0.5 * (1.0 / p + 1.0 / (1.0 - p));
    double de = 0.0, treated_term = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      de += (a + b * t[i]) * u[i];
      treated_term += (1.0 - t[i]) / (2.0 * (1.0 - p)) * u[i];
    }
    e.de = inv_n * de;
    e.ie = inv_n * treated_term - inv_n * u_tilde.sum();
  }
  return e;
}

}  // namespace netcausal
