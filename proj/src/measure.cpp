#include "netcausal/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace netcausal {

namespace {

// log cosh without overflow for large |x|.
double log_cosh(double x) {
  double a = std::abs(x);
  return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

// Gauss-Legendre nodes/weights on [-1,1] via Newton iteration on the
// three-term Legendre recurrence. Weights returned sum to 2.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (z * p0 - p1) / (z * z - 1.0);
      double z1 = z;
      z = z1 - p0 / pp;
      if (std::abs(z - z1) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    w[n - 1 - i] = w[i];
  }
}

}  // namespace

BaseMeasure::BaseMeasure(Kind kind, std::vector<double> x, std::vector<double> w)
    : kind_(kind), x_(std::move(x)), w_(std::move(w)) {
  if (x_.size() != w_.size())
    throw std::invalid_argument("measure: locations/weights size mismatch");
  if (x_.size() < 2)
    throw std::invalid_argument("measure: need at least two atoms");
  for (double v : x_)
    if (!(v >= -1.0 && v <= 1.0))
      throw std::invalid_argument("measure: support must lie in [-1,1]");
  double s = 0.0;
  for (double v : w_) {
    if (!(v > 0.0)) throw std::invalid_argument("measure: weights must be positive");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-9)
    throw std::invalid_argument("measure: weights must sum to 1");
  for (double& v : w_) v /= s;
  double lo = *std::min_element(x_.begin(), x_.end());
  double hi = *std::max_element(x_.begin(), x_.end());
  if (hi - lo < 1e-14)
    throw std::invalid_argument("measure: degenerate (single support point)");
  two_point_sym_ = x_.size() == 2 &&
                   ((x_[0] == 1.0 && x_[1] == -1.0) ||
                    (x_[0] == -1.0 && x_[1] == 1.0)) &&
                   std::abs(w_[0] - 0.5) < 1e-15 && std::abs(w_[1] - 0.5) < 1e-15;
}

BaseMeasure BaseMeasure::discrete(std::vector<double> locations,
                                  std::vector<double> weights) {
  return BaseMeasure(Kind::discrete, std::move(locations), std::move(weights));
}

BaseMeasure BaseMeasure::rademacher() {
  return BaseMeasure(Kind::discrete, {1.0, -1.0}, {0.5, 0.5});
}

BaseMeasure BaseMeasure::uniform(int nodes) {
  if (nodes < 2) throw std::invalid_argument("measure: need at least 2 nodes");
  std::vector<double> x, w;
  gauss_legendre(nodes, x, w);
  for (double& v : w) v *= 0.5;  // uniform density on [-1,1]
  return BaseMeasure(Kind::quadrature, std::move(x), std::move(w));
}

BaseMeasure BaseMeasure::preset(const std::string& name) {
  if (name == "rademacher") return rademacher();
  if (name == "uniform") return uniform();
  throw std::invalid_argument("measure: unknown preset '" + name + "'");
}

BaseMeasure BaseMeasure::from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  if (j.is_string()) return preset(j.get<std::string>());
  std::string kind = j.at("kind").get<std::string>();
  Kind k;
  if (kind == "discrete")
    k = Kind::discrete;
  else if (kind == "quadrature")
    k = Kind::quadrature;
  else
    throw std::invalid_argument("measure: kind must be discrete or quadrature");
  std::vector<double> x, w;
  for (const auto& atom : j.at("atoms")) {
    if (!atom.is_array() || atom.size() != 2)
      throw std::invalid_argument("measure: atoms must be [x, w] pairs");
    x.push_back(atom[0].get<double>());
    w.push_back(atom[1].get<double>());
  }
  return BaseMeasure(k, std::move(x), std::move(w));
}

std::string BaseMeasure::to_json() const {
  nlohmann::json j;
  j["kind"] = kind_ == Kind::discrete ? "discrete" : "quadrature";
  auto atoms = nlohmann::json::array();
  for (std::size_t i = 0; i < x_.size(); ++i)
    atoms.push_back({x_[i], w_[i]});
  j["atoms"] = atoms;
  return j.dump();
}

bool BaseMeasure::symmetric() const {
  std::vector<int> idx(x_.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return x_[a] < x_[b]; });
  int lo = 0, hi = static_cast<int>(idx.size()) - 1;
  while (lo <= hi) {
    if (std::abs(x_[idx[lo]] + x_[idx[hi]]) > 1e-12) return false;
    if (std::abs(w_[idx[lo]] - w_[idx[hi]]) > 1e-12) return false;
    ++lo;
    --hi;
  }
  return true;
}

// Sum of p[i]*x[i] pairing index i with its mirror m-1-i.  Quadrature rules
// built here place node -z at i and +z at m-1-i with equal weights, so under
// an even tilt each pair cancels exactly in floating point and a symmetric
// measure gets a tilted mean of exactly zero, not merely O(1e-17).
double BaseMeasure::mirrored_moment(const std::vector<double>& p) const {
  const std::size_t m = x_.size();
  double acc = 0.0;
  for (std::size_t i = 0, j = m - 1; i < j; ++i, --j)
    acc += p[i] * x_[i] + p[j] * x_[j];
  if (m % 2 == 1) {
    const std::size_t mid = m / 2;
    acc += p[mid] * x_[mid];
  }
  return acc;
}

double BaseMeasure::tilted_masses(TiltParams lam, std::vector<double>& p) const {
  const std::size_t m = x_.size();
  p.resize(m);
  double emax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    double e = lam.lambda1 * x_[i] + 0.5 * lam.lambda2 * x_[i] * x_[i];
    p[i] = e;
    emax = std::max(emax, e);
  }
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    p[i] = w_[i] * std::exp(p[i] - emax);
    s += p[i];
  }
  return s;  // alpha = emax + log(s); caller re-derives emax cheaply if needed
}

double BaseMeasure::alpha(TiltParams lam) const {
  if (lam.lambda2 < 0.0) throw std::invalid_argument("tilt: lambda2 must be >= 0");
  if (two_point_sym_) return 0.5 * lam.lambda2 + log_cosh(lam.lambda1);
  std::vector<double> p;
  double s = tilted_masses(lam, p);
  double emax = -std::numeric_limits<double>::infinity();
  for (double xi : x_)
    emax = std::max(emax, lam.lambda1 * xi + 0.5 * lam.lambda2 * xi * xi);
  return emax + std::log(s);
}

double BaseMeasure::alpha_prime(TiltParams lam) const {
  if (lam.lambda2 < 0.0) throw std::invalid_argument("tilt: lambda2 must be >= 0");
  if (two_point_sym_) return std::tanh(lam.lambda1);
  std::vector<double> p;
  double s = tilted_masses(lam, p);
  return std::clamp(mirrored_moment(p) / s, -1.0, 1.0);
}

double BaseMeasure::alpha_second(TiltParams lam) const {
  if (lam.lambda2 < 0.0) throw std::invalid_argument("tilt: lambda2 must be >= 0");
  if (two_point_sym_) {
    double t = std::tanh(lam.lambda1);
    return std::clamp(1.0 - t * t, 0.0, 1.0);
  }
  std::vector<double> p;
  double s = tilted_masses(lam, p);
  double mean = mirrored_moment(p) / s;
  double var = 0.0;
  for (std::size_t i = 0; i < x_.size(); ++i) {
    double d = x_[i] - mean;
    var += p[i] * d * d;
  }
  return std::clamp(var / s, 0.0, 1.0);
}

Eigen::VectorXd BaseMeasure::alpha_prime(const Eigen::VectorXd& lambda1,
                                         double lambda2) const {
  Eigen::VectorXd out(lambda1.size());
  if (two_point_sym_) {
    out = lambda1.array().tanh();
    return out;
  }
  for (Eigen::Index i = 0; i < lambda1.size(); ++i)
    out[i] = alpha_prime({lambda1[i], lambda2});
  return out;
}

Eigen::VectorXd BaseMeasure::alpha_second(const Eigen::VectorXd& lambda1,
                                          double lambda2) const {
  Eigen::VectorXd out(lambda1.size());
  if (two_point_sym_) {
    out = 1.0 - lambda1.array().tanh().square();
    return out;
  }
  for (Eigen::Index i = 0; i < lambda1.size(); ++i)
    out[i] = alpha_second({lambda1[i], lambda2});
  return out;
}

double BaseMeasure::sample_tilted(TiltParams lam, std::mt19937_64& rng) const {
  if (lam.lambda2 < 0.0) throw std::invalid_argument("tilt: lambda2 must be >= 0");
  std::vector<double> p;
  double s = tilted_masses(lam, p);
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng) * s;
  double acc = 0.0;
  for (std::size_t i = 0; i < x_.size(); ++i) {
    acc += p[i];
    if (u <= acc) return x_[i];
  }
  return x_.back();
}

}  // namespace netcausal
