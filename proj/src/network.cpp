#include "netcausal/network.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

namespace netcausal {

namespace {
constexpr double kSparseDensityThreshold = 0.05;

std::uint64_t pair_key(int i, int j, int n) {
  return static_cast<std::uint64_t>(i) * static_cast<std::uint64_t>(n) + j;
}
}  // namespace

std::string family_name(GraphFamily f) {
  switch (f) {
    case GraphFamily::complete: return "complete";
    case GraphFamily::regular: return "regular";
    case GraphFamily::erdos_renyi: return "erdos_renyi";
    case GraphFamily::graphon: return "graphon";
    case GraphFamily::gaussian: return "gaussian";
    case GraphFamily::custom: return "custom";
  }
  return "custom";
}

GraphFamily family_from_name(const std::string& name) {
  if (name == "complete") return GraphFamily::complete;
  if (name == "regular") return GraphFamily::regular;
  if (name == "erdos_renyi") return GraphFamily::erdos_renyi;
  if (name == "graphon") return GraphFamily::graphon;
  if (name == "gaussian") return GraphFamily::gaussian;
  if (name == "custom") return GraphFamily::custom;
  throw std::invalid_argument("network: unknown family '" + name + "'");
}

void InteractionMatrix::set_dense(Eigen::MatrixXd m) {
  n_ = static_cast<int>(m.rows());
  dense_ = std::move(m);
  sparse_.reset();
}

void InteractionMatrix::set_sparse(int n,
                                   const std::vector<Eigen::Triplet<double>>& upper) {
  n_ = n;
  std::vector<Eigen::Triplet<double>> both;
  both.reserve(upper.size() * 2);
  for (const auto& t : upper) {
    both.emplace_back(t.row(), t.col(), t.value());
    both.emplace_back(t.col(), t.row(), t.value());
  }
  Eigen::SparseMatrix<double> s(n, n);
  s.setFromTriplets(both.begin(), both.end());
  s.makeCompressed();
  sparse_ = std::move(s);
  dense_.reset();
}

double InteractionMatrix::coeff(int i, int j) const {
  if (dense_) return (*dense_)(i, j);
  return sparse_->coeff(i, j);
}

Eigen::VectorXd InteractionMatrix::multiply(const Eigen::VectorXd& v) const {
  if (static_cast<int>(v.size()) != n_)
    throw std::invalid_argument("network: dimension mismatch in multiply");
  if (dense_) return (*dense_) * v;
  return (*sparse_) * v;
}

double InteractionMatrix::row_dot(int i, const Eigen::VectorXd& v) const {
  if (dense_) return dense_->row(i).dot(v);
  double s = 0.0;
  // symmetric, so column i equals row i
  for (Eigen::SparseMatrix<double>::InnerIterator it(*sparse_, i); it; ++it)
    s += it.value() * v[it.row()];
  return s;
}

Eigen::MatrixXd InteractionMatrix::dense() const {
  if (dense_) return *dense_;
  return Eigen::MatrixXd(*sparse_);
}

Eigen::MatrixXd InteractionMatrix::normalized() const {
  if (gaussian_G_) return *gaussian_G_;
  if (beta_ != 0.0) return dense() / beta_;
  Eigen::MatrixXd a = dense();
  if (a.cwiseAbs().maxCoeff() > 0.0)
    throw std::runtime_error(
        "network: cannot derive normalized matrix for beta = 0 with nonzero "
        "entries");
  return Eigen::MatrixXd::Zero(n_, n_);
}

double InteractionMatrix::trace_square() const {
  if (dense_) return dense_->squaredNorm();
  double s = 0.0;
  for (int k = 0; k < sparse_->outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(*sparse_, k); it; ++it)
      s += it.value() * it.value();
  return s;
}

int InteractionMatrix::edge_count() const {
  if (sparse_) return static_cast<int>(sparse_->nonZeros() / 2);
  int c = 0;
  for (int i = 0; i < n_; ++i)
    for (int j = i + 1; j < n_; ++j)
      if ((*dense_)(i, j) != 0.0) ++c;
  return c;
}

double InteractionMatrix::operator_norm(double tol, int max_iter,
                                        bool* converged) const {
  if (converged) *converged = true;
  std::mt19937_64 rng(0xDA3E39CB94B95BDBull);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int attempt = 0; attempt < 2; ++attempt) {
    Eigen::VectorXd v(n_);
    for (int i = 0; i < n_; ++i) v[i] = gauss(rng);
    v.normalize();
    double lam = 0.0;
    for (int it = 0; it < max_iter; ++it) {
      Eigen::VectorXd w = multiply(v);
      double nrm = w.norm();
      if (nrm == 0.0) break;  // v in kernel; retry with a fresh vector
      double lam_new = nrm;
      w /= nrm;
      if (std::abs(lam_new - lam) <= tol * std::max(1.0, lam_new)) {
        if (converged) *converged = true;
        return lam_new;
      }
      lam = lam_new;
      v = w;
      if (it == max_iter - 1) {
        if (converged) *converged = false;
        return lam;
      }
    }
  }
  return 0.0;  // A annihilated two random vectors: zero matrix
}

InteractionMatrix complete_graph(int n, double beta) {
  if (n < 1) throw std::invalid_argument("network: n must be positive");
  InteractionMatrix m;
  m.family_ = GraphFamily::complete;
  m.beta_ = beta;
  Eigen::MatrixXd a = Eigen::MatrixXd::Constant(n, n, beta / n);
  a.diagonal().setZero();
  m.set_dense(std::move(a));
  return m;
}

InteractionMatrix regular_graph(int n, int degree, double beta,
                                std::mt19937_64& rng) {
  if (n < 2) throw std::invalid_argument("network: n must be >= 2");
  if (degree < 1 || degree >= n)
    throw std::invalid_argument("network: degree must satisfy 1 <= d < n");
  if ((static_cast<long long>(n) * degree) % 2 != 0)
    throw std::invalid_argument("network: n * degree must be even");

  const double value = beta / degree;
  const int total_stubs = n * degree;
  const long long max_retries = 200LL * total_stubs + 1000;
  std::unordered_set<std::uint64_t> edges;

  for (int restart = 0; restart < 200; ++restart) {
    edges.clear();
    std::vector<int> stubs;
    stubs.reserve(total_stubs);
    for (int v = 0; v < n; ++v)
      for (int k = 0; k < degree; ++k) stubs.push_back(v);
    long long retries = 0;
    bool dead = false;
    while (!stubs.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, stubs.size() - 1);
      std::size_t ia = pick(rng);
      std::swap(stubs[ia], stubs.back());
      int a = stubs.back();
      stubs.pop_back();
      std::uniform_int_distribution<std::size_t> pick2(0, stubs.size() - 1);
      std::size_t ib = pick2(rng);
      std::swap(stubs[ib], stubs.back());
      int b = stubs.back();
      stubs.pop_back();
      int lo = std::min(a, b), hi = std::max(a, b);
      if (a == b || edges.count(pair_key(lo, hi, n))) {
        stubs.push_back(a);
        stubs.push_back(b);
        if (++retries > max_retries) {
          dead = true;
          break;
        }
        continue;
      }
      edges.insert(pair_key(lo, hi, n));
    }
    if (!dead) {
      InteractionMatrix m;
      m.family_ = GraphFamily::regular;
      m.beta_ = beta;
      double density = static_cast<double>(degree) / (n - 1);
      if (density < kSparseDensityThreshold) {
        std::vector<Eigen::Triplet<double>> tri;
        tri.reserve(edges.size());
        for (std::uint64_t key : edges)
          tri.emplace_back(static_cast<int>(key / n), static_cast<int>(key % n),
                           value);
        m.set_sparse(n, tri);
      } else {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
        for (std::uint64_t key : edges) {
          int i = static_cast<int>(key / n), j = static_cast<int>(key % n);
          a(i, j) = value;
          a(j, i) = value;
        }
        m.set_dense(std::move(a));
      }
      return m;
    }
  }
  throw std::runtime_error(
      "network: regular graph sampling failed after 200 restarts");
}

InteractionMatrix erdos_renyi(int n, double p, double beta,
                              std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("network: n must be positive");
  if (!(p > 0.0 && p <= 1.0))
    throw std::invalid_argument("network: p must lie in (0, 1]");
  const double value = beta / (n * p);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  InteractionMatrix m;
  m.family_ = GraphFamily::erdos_renyi;
  m.beta_ = beta;
  if (p < kSparseDensityThreshold) {
    std::vector<Eigen::Triplet<double>> tri;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (unif(rng) < p) tri.emplace_back(i, j, value);
    m.set_sparse(n, tri);
  } else {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (unif(rng) < p) {
          a(i, j) = value;
          a(j, i) = value;
        }
    m.set_dense(std::move(a));
  }
  return m;
}

InteractionMatrix graphon(int n, const std::function<double(double, double)>& w,
                          double rho, double beta, std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("network: n must be positive");
  if (!(rho > 0.0 && rho <= 1.0))
    throw std::invalid_argument("network: rho must lie in (0, 1]");
  if (!w) throw std::invalid_argument("network: graphon kernel required");
  const double value = beta / (n * rho);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> u(n);
  for (int i = 0; i < n; ++i) u[i] = unif(rng);
  std::vector<Eigen::Triplet<double>> tri;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double wij = w(u[i], u[j]);
      if (!(wij >= 0.0 && wij <= 1.0))
        throw std::invalid_argument("network: graphon kernel left [0,1]");
      if (unif(rng) < rho * wij) tri.emplace_back(i, j, value);
    }
  InteractionMatrix m;
  m.family_ = GraphFamily::graphon;
  m.beta_ = beta;
  if (rho < kSparseDensityThreshold) {
    m.set_sparse(n, tri);
  } else {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (const auto& t : tri) {
      a(t.row(), t.col()) = t.value();
      a(t.col(), t.row()) = t.value();
    }
    m.set_dense(std::move(a));
  }
  return m;
}

InteractionMatrix gaussian_sk(int n, double beta, std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("network: n must be positive");
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(n)));
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double v = gauss(rng);
      g(i, j) = v;
      g(j, i) = v;
    }
  InteractionMatrix m;
  m.family_ = GraphFamily::gaussian;
  m.beta_ = beta;
  m.gaussian_G_ = g;
  m.set_dense(beta * g);
  return m;
}

InteractionMatrix custom_matrix(const Eigen::MatrixXd& a, double beta,
                                GraphFamily family) {
  if (a.rows() != a.cols())
    throw std::invalid_argument("network: matrix must be square");
  const int n = static_cast<int>(a.rows());
  for (int i = 0; i < n; ++i) {
    if (a(i, i) != 0.0)
      throw std::invalid_argument("network: diagonal must be zero");
    for (int j = i + 1; j < n; ++j)
      if (std::abs(a(i, j) - a(j, i)) > 1e-12)
        throw std::invalid_argument("network: matrix must be symmetric");
  }
  InteractionMatrix m;
  m.family_ = family;
  m.beta_ = beta;
  m.set_dense(a);
  return m;
}

NetworkDiagnostics diagnostics(const InteractionMatrix& a,
                               double high_temp_threshold,
                               double mean_field_threshold) {
  NetworkDiagnostics d;
  d.high_temp_threshold = high_temp_threshold;
  d.mean_field_threshold = mean_field_threshold;
  d.op_norm = a.operator_norm(1e-8, 10000, &d.power_iteration_converged);
  d.trace_square_over_n = a.trace_square() / a.n();
  d.high_temperature = d.op_norm < high_temp_threshold;
  d.mean_field_ok = d.trace_square_over_n < mean_field_threshold;
  return d;
}

void write_matrix_coo(const InteractionMatrix& a, const std::string& path,
                      std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("network: cannot open " + path);
  char buf[96];
  const int n = a.n();
  if (a.is_sparse()) {
    // iterate upper triangle of stored sparse pattern
    Eigen::MatrixXd d = a.dense();
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (d(i, j) != 0.0) {
          std::snprintf(buf, sizeof buf, "%d %d %.17g\n", i, j, d(i, j));
          out << buf;
        }
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (a.coeff(i, j) != 0.0) {
          std::snprintf(buf, sizeof buf, "%d %d %.17g\n", i, j, a.coeff(i, j));
          out << buf;
        }
  }
  out.close();
  nlohmann::json meta;
  meta["n"] = a.n();
  meta["family"] = family_name(a.family());
  meta["beta"] = a.beta();
  meta["seed"] = seed;
  std::ofstream side(path + ".json");
  if (!side) throw std::runtime_error("network: cannot open " + path + ".json");
  side << meta.dump(2) << "\n";
}

InteractionMatrix read_matrix_coo(const std::string& path) {
  std::ifstream side(path + ".json");
  if (!side)
    throw std::runtime_error("network: missing sidecar " + path + ".json");
  nlohmann::json meta = nlohmann::json::parse(side);
  const int n = meta.at("n").get<int>();
  if (n < 1) throw std::runtime_error("network: sidecar n must be positive");
  const GraphFamily family = family_from_name(meta.at("family").get<std::string>());
  const double beta = meta.at("beta").get<double>();

  std::ifstream in(path);
  if (!in) throw std::runtime_error("network: cannot open " + path);
  std::vector<Eigen::Triplet<double>> tri;
  std::unordered_set<std::uint64_t> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    int i, j;
    double v;
    if (!(ss >> i >> j >> v))
      throw std::runtime_error("network: bad COO line " + std::to_string(lineno));
    if (i < 0 || j < 0 || i >= n || j >= n || i >= j)
      throw std::runtime_error("network: COO indices must satisfy 0 <= i < j < n (line " +
                               std::to_string(lineno) + ")");
    if (!std::isfinite(v))
      throw std::runtime_error("network: non-finite value on line " +
                               std::to_string(lineno));
    if (!seen.insert(pair_key(i, j, n)).second)
      throw std::runtime_error("network: duplicate entry on line " +
                               std::to_string(lineno));
    tri.emplace_back(i, j, v);
  }

  InteractionMatrix m;
  m.family_ = family;
  m.beta_ = beta;
  double density =
      n > 1 ? static_cast<double>(tri.size()) / (0.5 * n * (n - 1)) : 0.0;
  if (density < kSparseDensityThreshold && family != GraphFamily::gaussian &&
      family != GraphFamily::complete) {
    m.set_sparse(n, tri);
  } else {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (const auto& t : tri) {
      a(t.row(), t.col()) = t.value();
      a(t.col(), t.row()) = t.value();
    }
    m.set_dense(std::move(a));
  }
  if (family == GraphFamily::gaussian && beta != 0.0)
    m.gaussian_G_ = m.dense() / beta;
  return m;
}

}  // namespace netcausal
