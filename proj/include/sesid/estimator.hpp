#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sesid/cpl.hpp"
#include "sesid/kernels.hpp"
#include "sesid/lure.hpp"

namespace sesid {

// Stacked least-squares problem Y ~ Phi * theta_tilde with Phi = [-Phi_Y, Phi_etaY, Phi_V].
// Row i corresponds to sample k = lower + i.
struct RegressionProblem {
  Eigen::VectorXd Y;
  kernels::RowMatrix phi_y;
  kernels::RowMatrix phi_eta;
  kernels::RowMatrix phi_v;
  std::size_t lower = 0;
  std::size_t upper = 0;
  std::size_t n_hat = 0;
  std::size_t d_hat = 0;
  CplPartition partition;
  bool constant_input = false;
  double v0 = 0.0;

  std::size_t rows() const noexcept { return static_cast<std::size_t>(Y.size()); }
  std::size_t num_parameters() const noexcept {
    return static_cast<std::size_t>(phi_y.cols() + phi_eta.cols() + phi_v.cols());
  }
  // Full regressor matrix [-Phi_Y, Phi_etaY, Phi_V].
  kernels::RowMatrix phi() const;
  // Row i of the full regressor matrix.
  Eigen::VectorXd regressor(std::size_t i) const;
};

/// Builds Y, Phi_Y, Phi_etaY and Phi_V for samples lower..upper of `record`.
///
/// y_f,k = y_{k-d} - y_{k-d-1} is formed from the measured outputs and eta uses the partition of
/// `c_hat` anchored at its zero breakpoint. In the constant-input form the eta rows are scaled
/// by v0 and Phi_V is the constant column v0; v must then be constant over the samples used.
///
/// Throws ConfigError when 0 is not in c_hat or lower < n_hat + d_hat + 1, and IndexError when
/// the record does not reach `upper`.
RegressionProblem build_regression(const SignalRecord& record, std::size_t n_hat,
                                   std::size_t d_hat, std::span<const double> c_hat,
                                   std::size_t lower, std::size_t upper, bool constant_input);

// theta_tilde = [a; theta_A; theta_Lambda]. theta_Lambda has one entry in the constant-input form.
struct ThetaTilde {
  Eigen::VectorXd a_hat;
  Eigen::VectorXd theta_A;
  Eigen::VectorXd theta_Lambda;

  std::size_t n_hat() const noexcept { return static_cast<std::size_t>(a_hat.size()); }
  // vec^{-1}(theta_A): (p+1) x n_hat, column j multiplies b_j.
  Eigen::MatrixXd slope_gain_matrix() const;
  Eigen::VectorXd stacked() const;
  static ThetaTilde from_stacked(const Eigen::VectorXd& theta, std::size_t n_hat,
                                 std::size_t num_intervals, bool constant_input);
};

struct BatchSolver {};

// Exponentially weighted RLS with theta initialised to theta0 * 1 and P to P0 * I.
struct RlsSolver {
  double theta0 = 0.0;
  double P0 = 1e6;
  double lambda = 1.0;
};

using Solver = std::variant<BatchSolver, RlsSolver>;

struct SolveResult {
  ThetaTilde theta;
  std::size_t rank = 0;
  bool rank_deficient = false;
};

// Batch: minimum-norm least-squares solution (complete orthogonal decomposition).
// RLS: one pass over the rows in order.
SolveResult solve_theta_tilde(const RegressionProblem& problem, const Solver& solver);

// Plain RLS on an arbitrary problem, exposed for the solver-agreement tests.
Eigen::VectorXd recursive_least_squares(const kernels::RowMatrix& phi, const Eigen::VectorXd& y,
                                        const RlsSolver& settings);
// Minimum-norm least squares; `rank` receives the numerical rank.
Eigen::VectorXd minimum_norm_least_squares(const kernels::RowMatrix& phi,
                                           const Eigen::VectorXd& y, std::size_t* rank = nullptr);

// argmin_x ||A - x r^T||_F^2 = A r / (r^T r). Throws DomainError when r = 0.
Eigen::VectorXd fit_left_factor(const Eigen::MatrixXd& A, const Eigen::VectorXd& r);

struct LeadingSingularTriple {
  double sigma = 0.0;
  Eigen::VectorXd u;
  Eigen::VectorXd v;
  // The top singular value is repeated (within 1e-10), so (u, v) is not unique.
  bool ambiguous = false;
};

// Best rank-1 approximation sigma u v^T of M; v's first nonzero entry is made positive.
LeadingSingularTriple leading_singular_triple(const Eigen::MatrixXd& M);

enum class IdentificationPath { general, constant_input };

std::string to_string(IdentificationPath path);

struct FitDiagnostics {
  double J_LS = 0.0;                 // ||Y - Phi theta_tilde||_2
  double J_A = 0.0;                  // ||vec^{-1}(theta_A) - mu b^T||_F
  double sigma_max_phi_eta = 0.0;    // largest singular value of Phi_etaY
  double J = 0.0;                    // ||Y - Phi theta||_2 with theta rebuilt from the model
  std::size_t rank = 0;
  std::size_t num_parameters = 0;
  bool rank_deficient = false;
  bool ambiguous_factorization = false;

  // J <= J_LS + sigma_max * J_A, with relative slack.
  bool bound_holds(double slack = 1e-9) const;
};

struct IdentifiedModel {
  DttdlModel model;  // nonlinearity is a CplFunction on c_hat with kappa = 0 at the zero breakpoint
  IdentificationPath path = IdentificationPath::general;
  // beta_hat (general path) or beta_LS (constant-input path).
  double beta_choice = 1.0;
  FitDiagnostics diagnostics;

  const CplFunction& nonlinearity() const { return std::get<CplFunction>(model.nonlinearity); }
};

// b = theta_Lambda / beta_hat, mu = vec^{-1}(theta_A) b / (b^T b).
IdentifiedModel finalize_general(const ThetaTilde& theta, double beta_hat,
                                 const CplPartition& partition, std::size_t d_hat);

// mu = beta_LS sigma_1 u_1, b = v_1 / beta_LS, beta = theta_Lambda / (1^T b).
IdentifiedModel finalize_constant(const ThetaTilde& theta, double beta_ls,
                                  const CplPartition& partition, std::size_t d_hat);

struct IdentificationSettings {
  std::size_t n_hat = 1;
  std::size_t d_hat = 0;
  std::vector<double> c_hat;
  std::size_t lower = 1;
  std::size_t upper = 1;
  bool constant_input = false;
  double beta = 1.0;  // beta_hat or beta_LS
  Solver solver = BatchSolver{};
};

IdentifiedModel identify(const SignalRecord& record, const IdentificationSettings& settings);

// theta = [a; vec(mu b^T); beta b] (or beta 1^T b in the constant-input form) for `problem`.
Eigen::VectorXd model_parameters(const DttdlModel& model, const RegressionProblem& problem);

// Largest singular value via the Gram matrix eigenvalues.
double largest_singular_value(const kernels::RowMatrix& M);

}  // namespace sesid
