#include "sesid/estimator.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <string>

#include "sesid/error.hpp"

namespace sesid {

using kernels::RowMatrix;

kernels::RowMatrix RegressionProblem::phi() const {
  RowMatrix out(phi_y.rows(), phi_y.cols() + phi_eta.cols() + phi_v.cols());
  out << -phi_y, phi_eta, phi_v;
  return out;
}

Eigen::VectorXd RegressionProblem::regressor(std::size_t i) const {
  const auto row = static_cast<Eigen::Index>(i);
  Eigen::VectorXd out(static_cast<Eigen::Index>(num_parameters()));
  out << -phi_y.row(row).transpose(), phi_eta.row(row).transpose(), phi_v.row(row).transpose();
  return out;
}

RegressionProblem build_regression(const SignalRecord& record, std::size_t n_hat,
                                   std::size_t d_hat, std::span<const double> c_hat,
                                   std::size_t lower, std::size_t upper, bool constant_input) {
  record.validate();
  if (n_hat == 0) {
    throw ConfigError("build_regression: n_hat must be at least 1");
  }
  if (lower < n_hat + d_hat + 1) {
    throw ConfigError("build_regression: lower window index " + std::to_string(lower) +
                      " must be at least n_hat + d_hat + 1 = " +
                      std::to_string(n_hat + d_hat + 1));
  }
  if (upper < lower) {
    throw ConfigError("build_regression: upper window index below lower");
  }
  if (upper >= record.size()) {
    throw IndexError("build_regression: record has " + std::to_string(record.size()) +
                     " samples, window needs index " + std::to_string(upper));
  }
  CplPartition partition =
      CplPartition::zero_anchored(std::vector<double>(c_hat.begin(), c_hat.end()));

  double v0 = 0.0;
  if (constant_input) {
    v0 = record.v[lower - n_hat];
    for (std::size_t j = lower - n_hat; j < upper; ++j) {
      if (record.v[j] != v0) {
        throw ConfigError("build_regression: constant-input form needs constant v (v[" +
                          std::to_string(j) + "] differs)");
      }
    }
  }

  const kernels::RegressionLayout layout{n_hat, d_hat, lower, upper, constant_input, v0};
  auto blocks = kernels::regression_rows(record.y, record.v, partition, layout);
  return RegressionProblem{std::move(blocks.Y),
                           std::move(blocks.phi_y),
                           std::move(blocks.phi_eta),
                           std::move(blocks.phi_v),
                           lower,
                           upper,
                           n_hat,
                           d_hat,
                           std::move(partition),
                           constant_input,
                           v0};
}

Eigen::MatrixXd ThetaTilde::slope_gain_matrix() const {
  const auto n = a_hat.size();
  if (n == 0 || theta_A.size() % n != 0) {
    throw DomainError("ThetaTilde: theta_A length is not a multiple of n_hat");
  }
  return Eigen::Map<const Eigen::MatrixXd>(theta_A.data(), theta_A.size() / n, n);
}

Eigen::VectorXd ThetaTilde::stacked() const {
  Eigen::VectorXd out(a_hat.size() + theta_A.size() + theta_Lambda.size());
  out << a_hat, theta_A, theta_Lambda;
  return out;
}

ThetaTilde ThetaTilde::from_stacked(const Eigen::VectorXd& theta, std::size_t n_hat,
                                    std::size_t num_intervals, bool constant_input) {
  const auto n = static_cast<Eigen::Index>(n_hat);
  const auto na = n * static_cast<Eigen::Index>(num_intervals);
  const Eigen::Index nl = constant_input ? 1 : n;
  if (theta.size() != n + na + nl) {
    throw DomainError("ThetaTilde::from_stacked: length mismatch");
  }
  return ThetaTilde{theta.head(n), theta.segment(n, na), theta.tail(nl)};
}

Eigen::VectorXd minimum_norm_least_squares(const RowMatrix& phi, const Eigen::VectorXd& y,
                                           std::size_t* rank) {
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(phi);
  if (rank != nullptr) {
    *rank = static_cast<std::size_t>(cod.rank());
  }
  return cod.solve(y);
}

Eigen::VectorXd recursive_least_squares(const RowMatrix& phi, const Eigen::VectorXd& y,
                                        const RlsSolver& settings) {
  if (!(settings.P0 > 0.0) || !(settings.lambda > 0.0) || settings.lambda > 1.0) {
    throw DomainError("recursive_least_squares: need P0 > 0 and 0 < lambda <= 1");
  }
  const auto m = phi.cols();
  Eigen::VectorXd theta = Eigen::VectorXd::Constant(m, settings.theta0);
  // Only the lower triangle of P is maintained.
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(m, m) * settings.P0;
  Eigen::VectorXd row(m);
  Eigen::VectorXd p_phi(m);
  for (Eigen::Index k = 0; k < phi.rows(); ++k) {
    row = phi.row(k).transpose();
    p_phi.noalias() = P.selfadjointView<Eigen::Lower>() * row;
    const double denom = settings.lambda + row.dot(p_phi);
    const double err = y(k) - row.dot(theta);
    theta += p_phi * (err / denom);
    P.selfadjointView<Eigen::Lower>().rankUpdate(p_phi, -1.0 / denom);
    if (settings.lambda != 1.0) {
      P /= settings.lambda;
    }
  }
  return theta;
}

SolveResult solve_theta_tilde(const RegressionProblem& problem, const Solver& solver) {
  const RowMatrix phi = problem.phi();
  SolveResult result;
  Eigen::VectorXd theta;
  if (std::holds_alternative<BatchSolver>(solver)) {
    theta = minimum_norm_least_squares(phi, problem.Y, &result.rank);
  } else {
    theta = recursive_least_squares(phi, problem.Y, std::get<RlsSolver>(solver));
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(phi);
    result.rank = static_cast<std::size_t>(cod.rank());
  }
  result.rank_deficient = result.rank < problem.num_parameters();
  result.theta = ThetaTilde::from_stacked(theta, problem.n_hat, problem.partition.num_intervals(),
                                          problem.constant_input);
  return result;
}

Eigen::VectorXd fit_left_factor(const Eigen::MatrixXd& A, const Eigen::VectorXd& r) {
  if (A.cols() != r.size()) {
    throw DomainError("fit_left_factor: A has " + std::to_string(A.cols()) + " columns, r has " +
                      std::to_string(r.size()) + " entries");
  }
  const double rr = r.squaredNorm();
  if (!(rr > 0.0)) {
    throw DomainError("fit_left_factor: r must be nonzero");
  }
  return A * r / rr;
}

LeadingSingularTriple leading_singular_triple(const Eigen::MatrixXd& M) {
  if (M.size() == 0) {
    throw DomainError("leading_singular_triple: empty matrix");
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  LeadingSingularTriple out;
  out.sigma = s(0);
  out.u = svd.matrixU().col(0);
  out.v = svd.matrixV().col(0);
  out.ambiguous = s.size() > 1 && s(0) > 0.0 && (s(0) - s(1)) <= 1e-10 * s(0);
  const double tiny = 1e-14 * out.v.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < out.v.size(); ++i) {
    if (std::abs(out.v(i)) > tiny) {
      if (out.v(i) < 0.0) {
        out.u = -out.u;
        out.v = -out.v;
      }
      break;
    }
  }
  return out;
}

std::string to_string(IdentificationPath path) {
  return path == IdentificationPath::general ? "general" : "constant_input";
}

bool FitDiagnostics::bound_holds(double slack) const {
  const double bound = J_LS + sigma_max_phi_eta * J_A;
  return J <= bound + slack * std::max(1.0, bound);
}

namespace {

std::vector<double> to_std(const Eigen::VectorXd& x) {
  return {x.data(), x.data() + x.size()};
}

void require_nonzero_choice(double beta, const char* what) {
  if (beta == 0.0 || !std::isfinite(beta)) {
    throw DomainError(std::string(what) + " must be finite and nonzero");
  }
}

}  // namespace

IdentifiedModel finalize_general(const ThetaTilde& theta, double beta_hat,
                                 const CplPartition& partition, std::size_t d_hat) {
  require_nonzero_choice(beta_hat, "beta_hat");
  if (theta.theta_Lambda.size() != theta.a_hat.size()) {
    throw DomainError("finalize_general: theta_Lambda must have n_hat entries");
  }
  const double lambda_norm = theta.theta_Lambda.norm();
  if (!(lambda_norm > std::numeric_limits<double>::epsilon() * theta.stacked().norm())) {
    throw DegenerateFitError("finalize_general: theta_Lambda is zero, b is unidentifiable");
  }
  const Eigen::MatrixXd M = theta.slope_gain_matrix();
  if (static_cast<std::size_t>(M.rows()) != partition.num_intervals()) {
    throw DomainError("finalize_general: theta_A does not match the partition");
  }
  const Eigen::VectorXd b = theta.theta_Lambda / beta_hat;
  const Eigen::VectorXd mu = fit_left_factor(M, b);

  IdentifiedModel out;
  out.model.a = to_std(theta.a_hat);
  out.model.b = to_std(b);
  out.model.beta = beta_hat;
  out.model.d = d_hat;
  out.model.nonlinearity = CplFunction(partition, to_std(mu), 0.0);
  out.path = IdentificationPath::general;
  out.beta_choice = beta_hat;
  out.diagnostics.J_A = (M - mu * b.transpose()).norm();
  return out;
}

IdentifiedModel finalize_constant(const ThetaTilde& theta, double beta_ls,
                                  const CplPartition& partition, std::size_t d_hat) {
  require_nonzero_choice(beta_ls, "beta_LS");
  if (theta.theta_Lambda.size() != 1) {
    throw DomainError("finalize_constant: theta_Lambda must be a scalar");
  }
  const Eigen::MatrixXd M = theta.slope_gain_matrix();
  if (static_cast<std::size_t>(M.rows()) != partition.num_intervals()) {
    throw DomainError("finalize_constant: theta_A does not match the partition");
  }
  if (!(M.norm() > 0.0)) {
    throw DegenerateFitError("finalize_constant: vec^-1(theta_A) is zero");
  }
  const LeadingSingularTriple top = leading_singular_triple(M);
  const Eigen::VectorXd mu = beta_ls * top.sigma * top.u;
  const Eigen::VectorXd b = top.v / beta_ls;
  const double b_sum = b.sum();
  if (!(std::abs(b_sum) > 1e-12 * b.cwiseAbs().sum())) {
    throw DegenerateFitError("finalize_constant: 1^T b = 0, beta is undefined");
  }

  IdentifiedModel out;
  out.model.a = to_std(theta.a_hat);
  out.model.b = to_std(b);
  out.model.beta = theta.theta_Lambda(0) / b_sum;
  out.model.d = d_hat;
  out.model.nonlinearity = CplFunction(partition, to_std(mu), 0.0);
  out.path = IdentificationPath::constant_input;
  out.beta_choice = beta_ls;
  out.diagnostics.J_A = (M - mu * b.transpose()).norm();
  out.diagnostics.ambiguous_factorization = top.ambiguous;
  return out;
}

Eigen::VectorXd model_parameters(const DttdlModel& model, const RegressionProblem& problem) {
  const auto* cpl = std::get_if<CplFunction>(&model.nonlinearity);
  if (cpl == nullptr || cpl->slopes().size() != problem.partition.num_intervals() ||
      model.order() != problem.n_hat) {
    throw DomainError("model_parameters: model does not match the regression structure");
  }
  const auto n = static_cast<Eigen::Index>(model.order());
  const auto p1 = static_cast<Eigen::Index>(cpl->slopes().size());
  const Eigen::Map<const Eigen::VectorXd> a(model.a.data(), n);
  const Eigen::Map<const Eigen::VectorXd> b(model.b.data(), n);
  const Eigen::Map<const Eigen::VectorXd> mu(cpl->slopes().data(), p1);
  const Eigen::MatrixXd mub = mu * b.transpose();
  const Eigen::Index nl = problem.constant_input ? 1 : n;
  Eigen::VectorXd theta(n + n * p1 + nl);
  theta.head(n) = a;
  theta.segment(n, n * p1) = Eigen::Map<const Eigen::VectorXd>(mub.data(), n * p1);
  if (problem.constant_input) {
    theta(n + n * p1) = model.beta * b.sum();
  } else {
    theta.tail(n) = model.beta * b;
  }
  return theta;
}

double largest_singular_value(const RowMatrix& M) {
  if (M.size() == 0) {
    return 0.0;
  }
  const Eigen::MatrixXd gram = M.transpose() * M;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
}

IdentifiedModel identify(const SignalRecord& record, const IdentificationSettings& settings) {
  const RegressionProblem problem =
      build_regression(record, settings.n_hat, settings.d_hat, settings.c_hat, settings.lower,
                       settings.upper, settings.constant_input);
  const SolveResult solved = solve_theta_tilde(problem, settings.solver);
  IdentifiedModel out = settings.constant_input
                            ? finalize_constant(solved.theta, settings.beta, problem.partition,
                                                settings.d_hat)
                            : finalize_general(solved.theta, settings.beta, problem.partition,
                                               settings.d_hat);
  const RowMatrix phi = problem.phi();
  auto& diag = out.diagnostics;
  diag.J_LS = (problem.Y - phi * solved.theta.stacked()).norm();
  diag.sigma_max_phi_eta = largest_singular_value(problem.phi_eta);
  diag.J = (problem.Y - phi * model_parameters(out.model, problem)).norm();
  diag.rank = solved.rank;
  diag.num_parameters = problem.num_parameters();
  diag.rank_deficient = solved.rank_deficient;
  return out;
}

}  // namespace sesid
