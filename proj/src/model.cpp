#include "netcausal/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace netcausal {

CovariateDist CovariateDist::point_mass(double v) {
  if (!(v >= -1.0 && v <= 1.0))
    throw std::invalid_argument("covariates: point mass must lie in [-1,1]");
  return {Kind::point_mass, v};
}

void ModelParams::validate() const {
  if (!(box_b > 0.0) || !(box_m > 0.0))
    throw std::invalid_argument("params: box bounds must be positive");
  if (std::abs(tau) > box_b)
    throw std::invalid_argument("params: |tau| exceeds box B");
  for (int j = 0; j < theta.size(); ++j)
    if (std::abs(theta[j]) > box_m)
      throw std::invalid_argument("params: |theta| exceeds box M");
  for (int j = 0; j < gamma.size(); ++j)
    if (std::abs(gamma[j]) > box_m)
      throw std::invalid_argument("params: |gamma| exceeds box M");
}

std::string params_to_json(const ModelParams& p) {
  nlohmann::json j;
  j["tau"] = p.tau;
  j["theta"] = std::vector<double>(p.theta.data(), p.theta.data() + p.theta.size());
  j["gamma"] = std::vector<double>(p.gamma.data(), p.gamma.data() + p.gamma.size());
  j["B"] = p.box_b;
  j["M"] = p.box_m;
  return j.dump();
}

ModelParams params_from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  ModelParams p;
  p.tau = j.at("tau").get<double>();
  auto th = j.at("theta").get<std::vector<double>>();
  p.theta = Eigen::Map<Eigen::VectorXd>(th.data(), th.size());
  if (j.contains("gamma")) {
    auto ga = j.at("gamma").get<std::vector<double>>();
    p.gamma = Eigen::Map<Eigen::VectorXd>(ga.data(), ga.size());
  }
  if (j.contains("B")) p.box_b = j.at("B").get<double>();
  if (j.contains("M")) p.box_m = j.at("M").get<double>();
  p.validate();
  return p;
}

void Dataset::validate() const {
  const int nn = n();
  if (t.size() != nn || x.rows() != nn)
    throw std::invalid_argument("dataset: row count mismatch across y/t/x");
  for (int i = 0; i < nn; ++i) {
    if (!(y[i] >= -1.0 && y[i] <= 1.0))
      throw std::invalid_argument("dataset: outcomes must lie in [-1,1]");
    if (t[i] != 1.0 && t[i] != -1.0)
      throw std::invalid_argument("dataset: treatments must be +1 or -1");
    for (int j = 0; j < x.cols(); ++j)
      if (!(x(i, j) >= -1.0 && x(i, j) <= 1.0))
        throw std::invalid_argument("dataset: covariates must lie in [-1,1]");
  }
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("dataset: cannot open " + path);
  out << "y,t";
  for (int j = 0; j < data.d(); ++j) out << ",x" << (j + 1);
  out << "\n";
  char buf[64];
  for (int i = 0; i < data.n(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", data.y[i]);
    out << buf;
    std::snprintf(buf, sizeof buf, ",%.17g", data.t[i]);
    out << buf;
    for (int j = 0; j < data.d(); ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", data.x(i, j));
      out << buf;
    }
    out << "\n";
  }
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("dataset: cannot open " + path);
  std::string header;
  if (!std::getline(in, header))
    throw std::runtime_error("dataset: empty file " + path);
  int cols = 1;
  for (char c : header)
    if (c == ',') ++cols;
  if (cols < 2 || header.substr(0, 2) != "y,")
    throw std::runtime_error("dataset: expected header y,t,x1,...");
  const int d = cols - 2;
  std::vector<double> ys, ts;
  std::vector<std::vector<double>> xs;
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (static_cast<int>(row.size()) != cols)
      throw std::runtime_error("dataset: wrong column count on line " +
                               std::to_string(lineno));
    ys.push_back(row[0]);
    ts.push_back(row[1]);
    xs.emplace_back(row.begin() + 2, row.end());
  }
  Dataset data;
  const int n = static_cast<int>(ys.size());
  data.y = Eigen::Map<Eigen::VectorXd>(ys.data(), n);
  data.t = Eigen::Map<Eigen::VectorXd>(ts.data(), n);
  data.x.resize(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) data.x(i, j) = xs[i][j];
  data.validate();
  return data;
}

OutcomeModel::OutcomeModel(std::shared_ptr<const InteractionMatrix> a_,
                           double tau_, Eigen::VectorXd theta_, BaseMeasure mu_)
    : a(std::move(a_)), tau(tau_), theta(std::move(theta_)), mu(std::move(mu_)) {
  if (!a) throw std::invalid_argument("model: interaction matrix required");
}

PropensityModel::PropensityModel(std::shared_ptr<const InteractionMatrix> m_,
                                 Eigen::VectorXd gamma_)
    : m(std::move(m_)), gamma(std::move(gamma_)) {
  if (!m) throw std::invalid_argument("model: interaction matrix required");
}

Eigen::MatrixXd sample_covariates(int n, int d, const CovariateDist& dist,
                                  std::mt19937_64& rng) {
  if (n < 1 || d < 0) throw std::invalid_argument("covariates: bad dimensions");
  Eigen::MatrixXd x(n, d);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) {
      switch (dist.kind) {
        case CovariateDist::Kind::uniform: x(i, j) = unif(rng); break;
        case CovariateDist::Kind::point_mass: x(i, j) = dist.value; break;
        case CovariateDist::Kind::rademacher:
          x(i, j) = coin(rng) < 0.5 ? 1.0 : -1.0;
          break;
      }
    }
  return x;
}

namespace {

// base linear field b_i = tau t_i + theta' x_i, validated dims
Eigen::VectorXd base_field(const OutcomeModel& m, const Eigen::VectorXd& t,
                           const Eigen::MatrixXd& x) {
  const int n = m.n();
  if (t.size() != n || x.rows() != n)
    throw std::invalid_argument("model: t/x row count must equal n");
  if (x.cols() != m.theta.size())
    throw std::invalid_argument("model: theta length must equal covariate dim");
  return m.tau * t + x * m.theta;
}

}  // namespace

TiltParams conditional_tilt_outcome(const OutcomeModel& m,
                                    const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& t,
                                    const Eigen::MatrixXd& x, int i) {
  if (i < 0 || i >= m.n()) throw std::invalid_argument("model: site out of range");
  Eigen::VectorXd b = base_field(m, t, x);
  if (y.size() != m.n())
    throw std::invalid_argument("model: y length must equal n");
  return {m.a->row_dot(i, y) + b[i], 0.0};
}

Eigen::VectorXd gibbs_sample_outcome(
    const OutcomeModel& m, const Eigen::VectorXd& t, const Eigen::MatrixXd& x,
    int sweeps, int burn_in, std::mt19937_64& rng,
    const std::function<void(const Eigen::VectorXd&)>& on_sweep) {
  if (sweeps < 0 || burn_in < 0)
    throw std::invalid_argument("gibbs: sweep counts must be nonnegative");
  const int n = m.n();
  Eigen::VectorXd b = base_field(m, t, x);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = m.mu.sample_tilted({0.0, 0.0}, rng);
  const int total = burn_in + sweeps;
  for (int s = 0; s < total; ++s) {
    for (int i = 0; i < n; ++i) {
      double lam = m.a->row_dot(i, y) + b[i];
      y[i] = m.mu.sample_tilted({lam, 0.0}, rng);
    }
    if (s >= burn_in && on_sweep) on_sweep(y);
  }
  return y;
}

Eigen::VectorXd gibbs_sample_treatment(
    const PropensityModel& m, const Eigen::MatrixXd& x, int sweeps, int burn_in,
    std::mt19937_64& rng,
    const std::function<void(const Eigen::VectorXd&)>& on_sweep) {
  if (sweeps < 0 || burn_in < 0)
    throw std::invalid_argument("gibbs: sweep counts must be nonnegative");
  const int n = m.n();
  if (x.rows() != n)
    throw std::invalid_argument("model: x row count must equal n");
  if (x.cols() != m.gamma.size())
    throw std::invalid_argument("model: gamma length must equal covariate dim");
  Eigen::VectorXd b = x * m.gamma;
  Eigen::VectorXd t(n);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (int i = 0; i < n; ++i) t[i] = coin(rng) < 0.5 ? 1.0 : -1.0;
  const int total = burn_in + sweeps;
  for (int s = 0; s < total; ++s) {
    for (int i = 0; i < n; ++i) {
      double h = m.m->row_dot(i, t) + b[i];
      // P(t_i = +1 | rest) = e^h / (e^h + e^-h)
      double p1 = 1.0 / (1.0 + std::exp(-2.0 * h));
      t[i] = coin(rng) < p1 ? 1.0 : -1.0;
    }
    if (s >= burn_in && on_sweep) on_sweep(t);
  }
  return t;
}

EnumerationResult brute_force_means(const OutcomeModel& m,
                                    const Eigen::VectorXd& t,
                                    const Eigen::MatrixXd& x) {
  if (m.mu.kind() != BaseMeasure::Kind::discrete)
    throw std::invalid_argument("enumeration: requires a discrete base measure");
  const int n = m.n();
  const int s = m.mu.size();
  double states = std::pow(static_cast<double>(s), n);
  if (states > 1e7)
    throw std::invalid_argument(
        "enumeration: state space exceeds 10^7 (" + std::to_string(s) + "^" +
        std::to_string(n) + ")");
  const auto& locs = m.mu.locations();
  const auto& wts = m.mu.weights();
  std::vector<double> logw(s);
  for (int k = 0; k < s; ++k) logw[k] = std::log(wts[k]);

  Eigen::VectorXd b = base_field(m, t, x);
  Eigen::MatrixXd a = m.a->dense();

  std::vector<int> idx(n, 0);
  Eigen::VectorXd y = Eigen::VectorXd::Constant(n, locs[0]);
  Eigen::VectorXd field = a * y;  // (A y)
  double quad = 0.5 * y.dot(field);
  double lin = y.dot(b);
  double lw_atoms = n * logw[0];

  // streaming log-sum-exp: S = sum exp(lw - mx), N_i = sum y_i exp(lw - mx)
  double mx = -std::numeric_limits<double>::infinity();
  double S = 0.0;
  Eigen::VectorXd N = Eigen::VectorXd::Zero(n);

  const long long total = static_cast<long long>(states + 0.5);
  for (long long step = 0;; ++step) {
    double lw = quad + lin + lw_atoms;
    if (lw > mx) {
      double scale = std::isfinite(mx) ? std::exp(mx - lw) : 0.0;
      S *= scale;
      N *= scale;
      mx = lw;
    }
    double e = std::exp(lw - mx);
    S += e;
    N += e * y;

    if (step == total - 1) break;
    // odometer increment with incremental field/exponent updates
    int pos = 0;
    while (true) {
      int next = idx[pos] + 1;
      int newk = next == s ? 0 : next;
      double old_val = locs[idx[pos]];
      double new_val = locs[newk];
      double delta = new_val - old_val;
      quad += delta * field[pos];  // A has zero diagonal
      lin += delta * b[pos];
      lw_atoms += logw[newk] - logw[idx[pos]];
      field += delta * a.col(pos);
      y[pos] = new_val;
      idx[pos] = newk;
      if (next != s) break;
      ++pos;
    }
  }

  EnumerationResult res;
  res.means = N / S;
  res.log_z = mx + std::log(S);
  return res;
}

EnumerationResult brute_force_treatment_means(const PropensityModel& m,
                                              const Eigen::MatrixXd& x) {
  const int n = m.n();
  OutcomeModel as_outcome(m.m, 0.0, m.gamma, BaseMeasure::rademacher());
  Eigen::VectorXd t0 = Eigen::VectorXd::Zero(n);
  return brute_force_means(as_outcome, t0, x);
}

double log_unnormalized(const OutcomeModel& m, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& t, const Eigen::MatrixXd& x) {
  if (y.size() != m.n())
    throw std::invalid_argument("model: y length must equal n");
  Eigen::VectorXd b = base_field(m, t, x);
  return 0.5 * y.dot(m.a->multiply(y)) + y.dot(b);
}

}  // namespace netcausal
