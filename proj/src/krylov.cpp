#include "spurt/krylov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "spurt/errors.hpp"

namespace spurt {

void KrylovConfig::validate() const {
  if (!(tol > 0.0)) throw std::invalid_argument("KrylovConfig: tol <= 0");
  if (max_dim < 1) throw std::invalid_argument("KrylovConfig: max_dim < 1");
  if (!(eps0 > 0.0)) throw std::invalid_argument("KrylovConfig: eps0 <= 0");
}

Vector fd_directional(const StateMap& map, const Vector& u, const Vector& phi_u,
                      const Vector& q, double eps0) {
  const double qn = q.norm();
  if (!(qn > 0.0)) throw std::invalid_argument("fd_directional: zero direction");
  const double eps = eps0 * (1.0 + u.norm()) / qn;
  return (map(u + eps * q) - phi_u) / eps;
}

Vector fd_directional(const StateMap& map, const Vector& u, const Vector& q,
                      double eps0) {
  return fd_directional(map, u, map(u), q, eps0);
}

Vector fd_directional_central(const StateMap& map, const Vector& u,
                              const Vector& q, double eps0) {
  const double qn = q.norm();
  if (!(qn > 0.0)) throw std::invalid_argument("fd_directional: zero direction");
  const double eps = eps0 * (1.0 + u.norm()) / qn;
  return (map(u + eps * q) - map(u - eps * q)) / (2.0 * eps);
}

DirectionalDerivative::DirectionalDerivative(StateMap map, Vector u,
                                             double eps0, bool central)
    : map_(std::move(map)), u_(std::move(u)), eps0_(eps0), central_(central) {
  phi_u_ = map_(u_);
}

DirectionalDerivative::DirectionalDerivative(StateMap map, Vector u,
                                             Vector phi_u, double eps0)
    : map_(std::move(map)), u_(std::move(u)), phi_u_(std::move(phi_u)),
      eps0_(eps0) {}

Vector DirectionalDerivative::operator()(const Vector& q) const {
  if (q.norm() == 0.0) return Vector::Zero(q.size());
  if (central_) return fd_directional_central(map_, u_, q, eps0_);
  return fd_directional(map_, u_, phi_u_, q, eps0_);
}

LinearOperator DirectionalDerivative::as_operator() const {
  return LinearOperator{[this](const Vector& q) { return (*this)(q); },
                        u_.size()};
}

GmresResult gmres(const LinearOperator& a, const Vector& b, const Vector& x0,
                  const KrylovConfig& c) {
  c.validate();
  if (b.size() != a.dim || x0.size() != a.dim)
    throw std::invalid_argument("gmres: dimension mismatch");

  GmresResult out;
  out.x = x0;
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    out.x.setZero();
    out.residuals.push_back(0.0);
    out.converged = true;
    return out;
  }

  Vector r = b - a.apply(x0);
  const double beta = r.norm();
  out.residuals.push_back(beta / bnorm);
  if (beta / bnorm <= c.tol) {
    out.converged = true;
    return out;
  }

  const int m = static_cast<int>(std::min<Eigen::Index>(c.max_dim, a.dim));
  Eigen::MatrixXd v(a.dim, m + 1);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m + 1, m);
  Eigen::VectorXd cs = Eigen::VectorXd::Zero(m), sn = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(m + 1);
  v.col(0) = r / beta;
  g[0] = beta;

  int used = 0;
  double rmax = 0.0;
  bool singular = false;
  for (int j = 0; j < m; ++j) {
    Vector w = a.apply(v.col(j));
    const double wnorm = w.norm();
    for (int pass = 0; pass < 2; ++pass) {
      for (int i = 0; i <= j; ++i) {
        const double hij = v.col(i).dot(w);
        h(i, j) += hij;
        w -= hij * v.col(i);
      }
    }
    h(j + 1, j) = w.norm();
    const bool exhausted = h(j + 1, j) <= 1e-14 * std::max(wnorm, 1e-300);
    if (!exhausted) v.col(j + 1) = w / h(j + 1, j);

    for (int i = 0; i < j; ++i) {
      const double t = cs[i] * h(i, j) + sn[i] * h(i + 1, j);
      h(i + 1, j) = -sn[i] * h(i, j) + cs[i] * h(i + 1, j);
      h(i, j) = t;
    }
    const double denom = std::hypot(h(j, j), h(j + 1, j));
    cs[j] = denom == 0.0 ? 1.0 : h(j, j) / denom;
    sn[j] = denom == 0.0 ? 0.0 : h(j + 1, j) / denom;
    h(j, j) = denom;
    h(j + 1, j) = 0.0;
    g[j + 1] = -sn[j] * g[j];
    g[j] = cs[j] * g[j];

    used = j + 1;
    rmax = std::max(rmax, std::abs(denom));
    const double rel = std::abs(g[j + 1]) / bnorm;
    out.residuals.push_back(rel);
    out.iterations = used;
    if (std::abs(denom) <= 1e-12 * rmax) {
      singular = true;
      break;
    }
    if (rel <= c.tol) {
      out.converged = true;
      break;
    }
    if (exhausted) break;
  }

  if (singular || !out.converged) {
    const bool exhausted_space = used < m || used == a.dim;
    if (singular || (exhausted_space && out.residuals.back() > c.tol)) {
      throw BreakdownError("gmres: operator numerically singular on the "
                           "Krylov space (relative residual " +
                           std::to_string(out.residuals.back()) + ")");
    }
  }

  Eigen::VectorXd y = h.topLeftCorner(used, used)
                          .triangularView<Eigen::Upper>()
                          .solve(g.head(used));
  out.x = x0 + v.leftCols(used) * y;
  return out;
}

int default_arnoldi_steps(int k) { return std::max(3 * k, 30); }

namespace {

struct Factorization {
  Eigen::MatrixXd v;
  Eigen::MatrixXd h;
  int steps = 0;
  double tail = 0.0; // h(steps, steps - 1)
};

Factorization arnoldi_factor(const LinearOperator& a, Vector v0, int m) {
  Factorization f;
  f.v.resize(a.dim, m + 1);
  f.h = Eigen::MatrixXd::Zero(m + 1, m);
  f.v.col(0) = v0 / v0.norm();
  for (int j = 0; j < m; ++j) {
    Vector w = a.apply(f.v.col(j));
    const double wnorm = w.norm();
    for (int pass = 0; pass < 2; ++pass) {
      for (int i = 0; i <= j; ++i) {
        const double hij = f.v.col(i).dot(w);
        f.h(i, j) += hij;
        w -= hij * f.v.col(i);
      }
    }
    f.h(j + 1, j) = w.norm();
    f.steps = j + 1;
    f.tail = f.h(j + 1, j);
    if (f.tail <= 1e-12 * std::max(wnorm, 1e-300)) {
      f.tail = 0.0; // invariant subspace found
      break;
    }
    f.v.col(j + 1) = w / f.tail;
  }
  return f;
}

} // namespace

double EigenReport::worst_residual() const {
  return residuals.empty() ? 0.0
                           : *std::max_element(residuals.begin(), residuals.end());
}

EigenReport arnoldi_eigs(const LinearOperator& a, int k, const KrylovConfig& c,
                         int max_restarts, bool throw_on_failure) {
  c.validate();
  if (k < 1 || k > c.max_dim || c.max_dim > a.dim)
    throw std::invalid_argument("arnoldi_eigs: need 1 <= k <= max_dim <= dim");

  std::mt19937_64 rng(20090501);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Vector start(a.dim);
  for (auto& x : start) x = unif(rng);

  EigenReport report, best;
  double best_worst = std::numeric_limits<double>::infinity();
  for (int attempt = 0; attempt <= max_restarts; ++attempt) {
    Factorization f = arnoldi_factor(a, start, c.max_dim);
    const int m = f.steps;
    Eigen::EigenSolver<Eigen::MatrixXd> es(f.h.topLeftCorner(m, m), true);
    const Eigen::VectorXcd vals = es.eigenvalues();
    const Eigen::MatrixXcd vecs = es.eigenvectors();

    std::vector<int> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) {
      const double ai = std::abs(vals[i]), aj = std::abs(vals[j]);
      if (std::abs(ai - aj) > 1e-14 * std::max(ai, aj)) return ai > aj;
      return vals[i].imag() > vals[j].imag();
    });

    report = EigenReport{};
    report.restarts = attempt;
    const int take = std::min(k, m);
    double worst = 0.0;
    for (int r = 0; r < take; ++r) {
      const int i = order[static_cast<std::size_t>(r)];
      Eigen::VectorXcd y = vecs.col(i);
      y /= y.norm();
      report.kappas.push_back(vals[i]);
      report.residuals.push_back(f.tail * std::abs(y[m - 1]));
      report.vectors.push_back(f.v.leftCols(m).cast<std::complex<double>>() * y);
      worst = std::max(worst, report.residuals.back());
    }
    if (take == k && worst <= c.tol) {
      report.converged = true;
      return report;
    }
    if (worst < best_worst) {
      best_worst = worst;
      best = report;
    }
    if (take < k) break; // invariant subspace smaller than k

    // Restart from the wanted Ritz vectors. Every other attempt mixes in a
    // fresh random vector so a stagnating subspace is not repeated exactly.
    Vector next = Vector::Zero(a.dim);
    for (const auto& x : report.vectors) next += x.real() + x.imag();
    if (attempt % 2 == 1) {
      Vector noise(a.dim);
      for (auto& x : noise) x = unif(rng);
      next += 1e-3 * next.norm() / noise.norm() * noise;
    }
    if (!(next.norm() > 0.0)) {
      for (auto& x : next) x = unif(rng);
    }
    start = next;
  }
  if (!throw_on_failure) return best;
  throw NotConverged("arnoldi_eigs: Ritz residuals above tolerance after " +
                     std::to_string(max_restarts) + " restarts (worst " +
                     std::to_string(best_worst) + ")");
}

std::vector<std::complex<double>>
to_continuous(const std::vector<std::complex<double>>& kappas, double t_h) {
  if (!(t_h > 0.0)) throw std::invalid_argument("to_continuous: t_h <= 0");
  std::vector<std::complex<double>> out;
  out.reserve(kappas.size());
  for (const auto& k : kappas) {
    if (k == std::complex<double>(0.0, 0.0))
      throw ZeroEigenvalue("to_continuous: zero eigenvalue of the discrete map");
    out.push_back(std::log(k) / t_h);
  }
  return out;
}

} // namespace spurt
