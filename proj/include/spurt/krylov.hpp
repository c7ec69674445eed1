#pragma once

/**
 * @file krylov.hpp
 * @brief Matrix-free linear algebra on top of timestepper maps.
 *
 * Linear operators are only ever applied to vectors. Jacobian actions of a
 * state map are estimated by one-sided finite differences, GMRES solves the
 * Newton corrections and an Arnoldi factorization provides the leading
 * eigenvalues of the linearized map.
 */

#include <complex>
#include <functional>
#include <vector>

#include <Eigen/Core>

namespace spurt {

using Vector = Eigen::VectorXd;
using StateMap = std::function<Vector(const Vector&)>;

/// A linear map R^m -> R^m known only through its action.
struct LinearOperator {
  std::function<Vector(const Vector&)> apply;
  Eigen::Index dim = 0;
};

struct KrylovConfig {
  double tol = 1e-8;
  int max_dim = 60;
  double eps0 = 1e-6;
  /// Central instead of forward differences in Jacobian actions built from
  /// this config: twice the map evaluations, O(eps^2) truncation error.
  bool central = false;

  void validate() const;
};

/// Forward-difference estimate of DPhi(u) q with step
/// eps = eps0 (1 + |u|) / |q|. `phi_u` must equal map(u).
Vector fd_directional(const StateMap& map, const Vector& u, const Vector& phi_u,
                      const Vector& q, double eps0);

/// Convenience overload that evaluates map(u) itself.
Vector fd_directional(const StateMap& map, const Vector& u, const Vector& q,
                      double eps0);

/// Central-difference estimate (map(u + eps q) - map(u - eps q)) / (2 eps).
Vector fd_directional_central(const StateMap& map, const Vector& u,
                              const Vector& q, double eps0);

/// Jacobian-action operator of a map at a fixed base point. The base image
/// map(u) is computed once, so k applications cost k + 1 map evaluations
/// (2k + 1 with central differences).
class DirectionalDerivative {
public:
  DirectionalDerivative(StateMap map, Vector u, double eps0, bool central = false);
  DirectionalDerivative(StateMap map, Vector u, Vector phi_u, double eps0);

  Vector operator()(const Vector& q) const;
  const Vector& base() const { return u_; }
  const Vector& image() const { return phi_u_; }
  LinearOperator as_operator() const;

private:
  StateMap map_;
  Vector u_;
  Vector phi_u_;
  double eps0_;
  bool central_ = false;
};

struct GmresResult {
  Vector x;
  /// Relative residual |b - A x| / |b| after each iteration, starting with
  /// the initial guess.
  std::vector<double> residuals;
  bool converged = false;
  int iterations = 0;
};

/// Unrestarted GMRES with modified Gram-Schmidt and one reorthogonalization
/// pass. Stops at tol or after max_dim iterations (converged = false).
/// Throws BreakdownError when the Krylov space is exhausted, or the projected
/// problem becomes numerically singular, while the residual is still above tol.
GmresResult gmres(const LinearOperator& a, const Vector& b, const Vector& x0,
                  const KrylovConfig& c);

struct EigenReport {
  std::vector<std::complex<double>> kappas;    ///< descending modulus
  std::vector<std::complex<double>> lambdas;   ///< filled by to_continuous
  std::vector<double> residuals;               ///< Ritz residual norms
  std::vector<Eigen::VectorXcd> vectors;       ///< unit Ritz vectors
  int restarts = 0;
  bool converged = false;

  double worst_residual() const;
};

/// Number of Arnoldi steps used by default for k requested eigenvalues.
int default_arnoldi_steps(int k);

/// k Ritz pairs of largest modulus from an m-step Arnoldi factorization with
/// m = c.max_dim (capped at the operator dimension). The start vector is
/// pseudo-random with a fixed seed. While any requested Ritz residual is above
/// c.tol the factorization is restarted from a combination of the wanted Ritz
/// vectors, at most `max_restarts` times. After that NotConverged is thrown,
/// unless `throw_on_failure` is false, in which case the attempt with the
/// smallest worst-case residual is returned with converged = false.
EigenReport arnoldi_eigs(const LinearOperator& a, int k, const KrylovConfig& c,
                         int max_restarts = 8, bool throw_on_failure = true);

/// lambda = log(kappa) / t_h on the principal branch.
std::vector<std::complex<double>>
to_continuous(const std::vector<std::complex<double>>& kappas, double t_h);

} // namespace spurt
