#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <optional>
#include <random>
#include <string>

namespace netcausal {

enum class GraphFamily { complete, regular, erdos_renyi, graphon, gaussian, custom };

std::string family_name(GraphFamily f);
GraphFamily family_from_name(const std::string& name);

// Symmetric interaction matrix A with zero diagonal, either dense or sparse
// depending on expected edge density (< 5% stores sparse). For the Gaussian
// family the unit-variance matrix G (A = beta * G) is stored explicitly so
// beta = 0 stays well-defined.
class InteractionMatrix {
 public:
  int n() const { return n_; }
  GraphFamily family() const { return family_; }
  double beta() const { return beta_; }
  bool is_sparse() const { return sparse_.has_value(); }

  double coeff(int i, int j) const;
  Eigen::VectorXd multiply(const Eigen::VectorXd& v) const;  // A v
  double row_dot(int i, const Eigen::VectorXd& v) const;     // (A v)_i
  // Dense copy of A (materializes if stored sparse).
  Eigen::MatrixXd dense() const;
  // G with entries of variance 1/n such that A = beta * G. Stored for the
  // Gaussian family; A/beta otherwise (zero matrix when beta == 0).
  Eigen::MatrixXd normalized() const;

  double trace_square() const;  // Tr(A^2) = sum_ij A_ij^2
  // Largest singular value via power iteration (symmetric: max |eigenvalue|).
  double operator_norm(double tol = 1e-8, int max_iter = 10000,
                       bool* converged = nullptr) const;

  int edge_count() const;  // stored off-diagonal nonzeros / 2

  friend InteractionMatrix complete_graph(int n, double beta);
  friend InteractionMatrix regular_graph(int n, int degree, double beta,
                                         std::mt19937_64& rng);
  friend InteractionMatrix erdos_renyi(int n, double p, double beta,
                                       std::mt19937_64& rng);
  friend InteractionMatrix graphon(int n,
                                   const std::function<double(double, double)>& w,
                                   double rho, double beta, std::mt19937_64& rng);
  friend InteractionMatrix gaussian_sk(int n, double beta, std::mt19937_64& rng);
  friend InteractionMatrix custom_matrix(const Eigen::MatrixXd& a, double beta,
                                         GraphFamily family);
  friend InteractionMatrix read_matrix_coo(const std::string& path);

 private:
  InteractionMatrix() = default;
  void set_dense(Eigen::MatrixXd m);
  void set_sparse(int n, const std::vector<Eigen::Triplet<double>>& upper);

  int n_ = 0;
  GraphFamily family_ = GraphFamily::custom;
  double beta_ = 0.0;
  std::optional<Eigen::MatrixXd> dense_;
  std::optional<Eigen::SparseMatrix<double>> sparse_;
  std::optional<Eigen::MatrixXd> gaussian_G_;
};

// (beta/n) (J - I): every pair interacts equally.
InteractionMatrix complete_graph(int n, double beta);
// beta/degree on the edges of a random simple d-regular graph (stub matching
// with pair-level rejection; near-uniform). Requires n*degree even, 0<d<n.
InteractionMatrix regular_graph(int n, int degree, double beta,
                                std::mt19937_64& rng);
// beta/(n p) on Bernoulli(p) edges, p in (0,1].
InteractionMatrix erdos_renyi(int n, double p, double beta, std::mt19937_64& rng);
// beta/(n rho) on edges drawn with prob rho*w(U_i,U_j), U_i iid Unif(0,1);
// w must map into [0,1].
InteractionMatrix graphon(int n, const std::function<double(double, double)>& w,
                          double rho, double beta, std::mt19937_64& rng);
// A = beta * G, G symmetric with iid N(0, 1/n) above the diagonal.
InteractionMatrix gaussian_sk(int n, double beta, std::mt19937_64& rng);
// Wraps a user matrix; must be symmetric with zero diagonal.
InteractionMatrix custom_matrix(const Eigen::MatrixXd& a, double beta = 0.0,
                                GraphFamily family = GraphFamily::custom);

struct NetworkDiagnostics {
  double op_norm = 0.0;
  double trace_square_over_n = 0.0;
  bool high_temperature = false;  // op_norm < high_temp_threshold
  bool mean_field_ok = false;     // trace_square_over_n < mean_field_threshold
  double high_temp_threshold = 0.25;
  double mean_field_threshold = 0.05;
  bool power_iteration_converged = true;
};

// Advisory regime checks; never gates computation.
NetworkDiagnostics diagnostics(const InteractionMatrix& a,
                               double high_temp_threshold = 0.25,
                               double mean_field_threshold = 0.05);

// COO text format: one "i j value" line per upper-triangle nonzero,
// 0-indexed; metadata (n, family, beta, seed) in a JSON sidecar at
// path + ".json".
void write_matrix_coo(const InteractionMatrix& a, const std::string& path,
                      std::uint64_t seed = 0);
InteractionMatrix read_matrix_coo(const std::string& path);

}  // namespace netcausal
