#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "spurt/errors.hpp"
#include "spurt/krylov.hpp"

using namespace spurt;
using doctest::Approx;
using Complex = std::complex<double>;

namespace {

LinearOperator from_matrix(const Eigen::MatrixXd& m) {
  return LinearOperator{[m](const Vector& x) { return Vector(m * x); }, m.rows()};
}

Eigen::MatrixXd random_matrix(int n, unsigned seed, double shift) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = N(rng) / std::sqrt(double(n));
  a += shift * Eigen::MatrixXd::Identity(n, n);
  return a;
}

bool non_increasing(const std::vector<double>& r) {
  for (std::size_t i = 1; i < r.size(); ++i)
    if (r[i] > r[i - 1] * (1 + 1e-12)) return false;
  return true;
}

} // namespace

TEST_CASE("finite-difference directional derivative of linear maps") {
  const StateMap identity = [](const Vector& u) { return u; };
  const StateMap twice = [](const Vector& u) { return Vector(2.0 * u); };
  const Vector u = Vector::LinSpaced(5, -1.0, 1.0);
  const Vector q = Vector::LinSpaced(5, 0.3, 0.7);
  CHECK((fd_directional(identity, u, q, 1e-6) - q).norm() < 1e-8);
  Vector e1 = Vector::Zero(2);
  e1[0] = 1.0;
  const Vector r = fd_directional(twice, Vector::Zero(2), e1, 1e-6);
  CHECK(r[0] == Approx(2.0).epsilon(1e-9));
  CHECK(std::abs(r[1]) < 1e-12);
}

TEST_CASE("finite-difference directional derivative is first order") {
  const StateMap quad = [](const Vector& u) {
    Vector r(2);
    r << u[0] * u[0], u[1];
    return r;
  };
  Vector u(2), q(2);
  u << 1.0, 0.0;
  q << 1.0, 0.0;
  const Vector r = fd_directional(quad, u, q, 1e-6);
  CHECK(r[0] == Approx(2.0).epsilon(1e-5));
  CHECK(std::abs(r[1]) < 1e-12);

  // Deviation from the exact 2 is eps = eps0 (1 + |u|) / |q|.
  std::vector<double> dev;
  for (double e : {1e-2, 5e-3, 2.5e-3, 1.25e-3}) dev.push_back(fd_directional(quad, u, q, e)[0] - 2.0);
  for (std::size_t i = 1; i < dev.size(); ++i) {
    const double order = std::log2(dev[i - 1] / dev[i]);
    CHECK(order > 0.8);
    CHECK(order < 1.2);
  }
  CHECK(dev[0] == Approx(1e-2 * 2.0).epsilon(1e-6));

  // The central variant has no first-order term on a quadratic.
  const Vector c = fd_directional_central(quad, u, q, 1e-2);
  CHECK(c[0] == Approx(2.0).epsilon(1e-12));
}

TEST_CASE("directional derivative operator caches the base image") {
  int calls = 0;
  const StateMap counted = [&calls](const Vector& u) {
    ++calls;
    return Vector(3.0 * u);
  };
  DirectionalDerivative d(counted, Vector::Ones(4), 1e-6);
  CHECK(calls == 1);
  for (int k = 0; k < 5; ++k) d(Vector::Ones(4));
  CHECK(calls == 6);
  CHECK(d(Vector::Zero(4)).norm() == 0.0);
  CHECK(calls == 6);
  CHECK((d.image() - 3.0 * Vector::Ones(4)).norm() == 0.0);
}

TEST_CASE("GMRES on small systems") {
  KrylovConfig c;
  c.tol = 1e-12;
  const Vector b = Vector::LinSpaced(6, 1.0, 2.0);
  const GmresResult id = gmres(from_matrix(Eigen::MatrixXd::Identity(6, 6)), b, Vector::Zero(6), c);
  CHECK(id.converged);
  CHECK(id.iterations == 1);
  CHECK((id.x - b).norm() < 1e-14);

  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
  d.diagonal() << 2.0, 4.0;
  Vector rhs(2);
  rhs << 2.0, 4.0;
  const GmresResult r = gmres(from_matrix(d), rhs, Vector::Zero(2), c);
  CHECK(r.converged);
  CHECK(r.iterations <= 2);
  CHECK(r.x[0] == Approx(1.0).epsilon(1e-12));
  CHECK(r.x[1] == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("GMRES refuses near-singular operators") {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
  d.diagonal() << 1.0, 1e-14;
  KrylovConfig c;
  c.tol = 1e-12;
  bool refused = false;
  try {
    const GmresResult r = gmres(from_matrix(d), Vector::Ones(2), Vector::Zero(2), c);
    refused = !r.converged;
  } catch (const BreakdownError&) {
    refused = true;
  }
  CHECK(refused);
}

TEST_CASE("GMRES residuals are monotone and terminate at the dimension") {
  for (int n : {10, 37, 100}) {
    const Eigen::MatrixXd a = random_matrix(n, 7u + n, 2.0);
    const Vector b = Vector::Ones(n);
    KrylovConfig c;
    c.tol = 1e-12;
    c.max_dim = n;
    const GmresResult r = gmres(from_matrix(a), b, Vector::Zero(n), c);
    CHECK(non_increasing(r.residuals));
    CHECK(r.residuals.back() < 1e-10);
    CHECK((a * r.x - b).norm() / b.norm() < 1e-10);
    CHECK(r.iterations <= n);
  }
}

TEST_CASE("GMRES with a nonzero initial guess") {
  const int n = 30;
  const Eigen::MatrixXd a = random_matrix(n, 99u, 3.0);
  const Vector x_true = Vector::LinSpaced(n, -1.0, 1.0);
  const Vector b = a * x_true;
  KrylovConfig c;
  c.tol = 1e-12;
  c.max_dim = n;
  const GmresResult r = gmres(from_matrix(a), b, x_true + 1e-3 * Vector::Ones(n), c);
  CHECK((r.x - x_true).norm() < 1e-9);
  CHECK(non_increasing(r.residuals));
}

TEST_CASE("Arnoldi on a diagonal operator") {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(3, 3);
  d.diagonal() << 0.9, 0.5, 0.1;
  KrylovConfig c;
  c.max_dim = 3;
  c.tol = 1e-10;
  const EigenReport r = arnoldi_eigs(from_matrix(d), 1, c);
  CHECK(std::abs(r.kappas[0] - Complex(0.9, 0.0)) < 1e-10);
  CHECK(r.converged);

  // Larger diagonal, several leading values.
  const int n = 80;
  Eigen::MatrixXd big = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) big(i, i) = 0.99 * std::pow(0.9, i);
  c.max_dim = 40;
  const EigenReport rb = arnoldi_eigs(from_matrix(big), 3, c);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(rb.kappas[i].real() - 0.99 * std::pow(0.9, i)) < 1e-10);
}

TEST_CASE("Arnoldi on a scaled rotation") {
  const double r = 0.8, theta = 0.7;
  Eigen::MatrixXd m(2, 2);
  m << r * std::cos(theta), -r * std::sin(theta), r * std::sin(theta), r * std::cos(theta);
  KrylovConfig c;
  c.max_dim = 2;
  c.tol = 1e-10;
  const EigenReport rep = arnoldi_eigs(from_matrix(m), 2, c);
  REQUIRE(rep.kappas.size() == 2);
  const Complex expect = std::polar(r, theta);
  CHECK(std::abs(rep.kappas[0] - expect) < 1e-10);
  CHECK(std::abs(rep.kappas[1] - std::conj(expect)) < 1e-10);

  // Rotation block embedded in a contracting diagonal.
  const int n = 50;
  Eigen::MatrixXd big = Eigen::MatrixXd::Zero(n, n);
  big.topLeftCorner(2, 2) = m;
  for (int i = 2; i < n; ++i) big(i, i) = 0.5 * std::pow(0.95, i);
  c.max_dim = 30;
  const EigenReport rb = arnoldi_eigs(from_matrix(big), 2, c);
  CHECK(std::abs(rb.kappas[0] - expect) < 1e-10);
  CHECK(std::abs(rb.kappas[1] - std::conj(expect)) < 1e-10);
}

TEST_CASE("Arnoldi on the identity and invariant subspaces") {
  KrylovConfig c;
  c.max_dim = 10;
  const EigenReport id = arnoldi_eigs(from_matrix(Eigen::MatrixXd::Identity(10, 10)), 1, c);
  CHECK(std::abs(id.kappas[0] - Complex(1.0, 0.0)) < 1e-12);
}

TEST_CASE("Ritz vectors are eigenvectors") {
  const int n = 60;
  const Eigen::MatrixXd a = random_matrix(n, 5u, 0.0);
  KrylovConfig c;
  c.max_dim = 60;
  c.tol = 1e-8;
  const EigenReport rep = arnoldi_eigs(from_matrix(a), 4, c);
  for (std::size_t i = 0; i < rep.kappas.size(); ++i) {
    const Eigen::VectorXcd v = rep.vectors[i];
    const Eigen::VectorXcd av = a.cast<Complex>() * v;
    CHECK((av - rep.kappas[i] * v).norm() < 1e-6);
    CHECK(std::abs(v.norm() - 1.0) < 1e-12);
  }
  for (std::size_t i = 1; i < rep.kappas.size(); ++i)
    CHECK(std::abs(rep.kappas[i]) <= std::abs(rep.kappas[i - 1]) + 1e-14);
}

TEST_CASE("continuous-time eigenvalues") {
  const double th = 1e-3;
  auto lam = to_continuous({Complex(1.0, 0.0)}, th);
  CHECK(std::abs(lam[0]) < 1e-15);
  lam = to_continuous({Complex(std::exp(-0.002), 0.0)}, th);
  CHECK(lam[0].real() == Approx(-2.0).epsilon(1e-12));
  lam = to_continuous({std::exp(th * Complex(0.5, 3.0))}, th);
  CHECK(std::abs(lam[0] - Complex(0.5, 3.0)) < 1e-9);
  CHECK_THROWS_AS(to_continuous({Complex(0.0, 0.0)}, th), ZeroEigenvalue);

  // exp then log is the identity on the principal strip.
  for (double im : {-3000.0, -100.0, 0.0, 1000.0, 3100.0}) {
    const Complex l(-7.0, im);
    CHECK(std::abs(to_continuous({std::exp(l * th)}, th)[0] - l) < 1e-8);
  }
  (void)std::numbers::pi;
}

TEST_CASE("config validation") {
  KrylovConfig c;
  CHECK_NOTHROW(c.validate());
  c.tol = 0.0;
  CHECK_THROWS(c.validate());
  c = KrylovConfig{};
  c.max_dim = 0;
  CHECK_THROWS(c.validate());
  c = KrylovConfig{};
  c.eps0 = -1.0;
  CHECK_THROWS(c.validate());
}
