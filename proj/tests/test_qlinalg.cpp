#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "dimbound/qlinalg.hpp"

using namespace dimbound::qlinalg;

namespace {

Matrix random_hermitian(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = Complex(g(rng), g(rng));
  return 0.5 * (a + a.adjoint());
}

Matrix random_density(int n, std::mt19937_64& rng) {
  Matrix a = random_hermitian(n, rng);
  Matrix r = a * a.adjoint();
  return r / r.trace().real();
}

}  // namespace

TEST_CASE("kron basics") {
  SubsystemShape q({2});
  auto i4 = kron(HermitianOperator::identity(q), HermitianOperator::identity(q));
  CHECK(i4.shape().dims() == std::vector<int>{2, 2});
  CHECK((i4.matrix() - Matrix::Identity(4, 4)).norm() == 0.0);

  Matrix p0 = Matrix::Zero(2, 2), p1 = Matrix::Zero(2, 2);
  p0(0, 0) = 1;
  p1(1, 1) = 1;
  auto k = kron(HermitianOperator(q, p0), HermitianOperator(q, p1));
  Matrix expect = Matrix::Zero(4, 4);
  expect(1, 1) = 1;
  CHECK((k.matrix() - expect).norm() == 0.0);

  std::mt19937_64 rng(1);
  for (int t = 0; t < 10; ++t) {
    Matrix a = random_hermitian(3, rng), b = random_hermitian(2, rng);
    auto ab = kron(HermitianOperator(SubsystemShape({3}), a), HermitianOperator(q, b));
    CHECK(std::abs(ab.trace() - a.trace().real() * b.trace().real()) < 1e-12);
  }
}

TEST_CASE("partial trace") {
  std::mt19937_64 rng(2);
  Matrix a = random_hermitian(3, rng), b = random_hermitian(2, rng);
  HermitianOperator ab = kron(HermitianOperator(SubsystemShape({3}), a),
                              HermitianOperator(SubsystemShape({2}), b));
  const int keep0[] = {0};
  const int keep1[] = {1};
  auto ra = partial_trace(ab, keep0);
  CHECK((ra.matrix() - b.trace() * a).norm() < 1e-12);
  auto rb = partial_trace(ab, keep1);
  CHECK((rb.matrix() - a.trace() * b).norm() < 1e-12);

  Vector phi = Vector::Zero(4);
  phi(0) = phi(3) = 1.0 / std::sqrt(2.0);
  auto bell = HermitianOperator::projector(SubsystemShape({2, 2}), phi);
  CHECK((partial_trace(bell, keep0).matrix() - 0.5 * Matrix::Identity(2, 2)).norm() < 1e-14);

  // trace preservation, three parties, keep a non-contiguous set
  Matrix rho = random_density(12, rng);
  const int keep02[] = {0, 2};
  Matrix red = partial_trace(rho, {2, 3, 2}, keep02);
  CHECK(red.rows() == 4);
  CHECK(std::abs(red.trace().real() - 1.0) < 1e-12);
}

TEST_CASE("partial transpose") {
  std::mt19937_64 rng(3);
  SubsystemShape s({2, 3, 2});
  for (int t = 0; t < 10; ++t) {
    HermitianOperator h(s, random_hermitian(12, rng));
    const int part[] = {0, 2};
    auto once = partial_transpose(h, part);
    auto twice = partial_transpose(once, part);
    CHECK((twice.matrix() - h.matrix()).norm() < 1e-14);
    CHECK(std::abs(once.trace() - h.trace()) < 1e-12);
  }
  // product state stays PSD
  Matrix r1 = random_density(2, rng), r2 = random_density(2, rng);
  const Matrix pr[] = {r1, r2};
  Matrix prod = kron_matrices(pr);
  const int p1[] = {1};
  auto e = herm_eig(partial_transpose(prod, {2, 2}, p1));
  CHECK(e.values.minCoeff() > -1e-12);

  Vector phi = Vector::Zero(4);
  phi(0) = phi(3) = 1.0 / std::sqrt(2.0);
  auto bell = HermitianOperator::projector(SubsystemShape({2, 2}), phi);
  auto eb = herm_eig(partial_transpose(bell, p1));
  CHECK(eb.values(3) == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("swap operator") {
  SubsystemShape two({2, 2});
  auto v = swap_operator(two, 0, 1);
  Vector k01 = Vector::Zero(4), k10 = Vector::Zero(4);
  k01(1) = 1;
  k10(2) = 1;
  CHECK((v.matrix() * k01 - k10).norm() == 0.0);
  CHECK((v.matrix() * v.matrix() - Matrix::Identity(4, 4)).norm() == 0.0);
  CHECK_THROWS_AS(swap_operator(SubsystemShape({2, 3}), 0, 1), LinalgError);

  SubsystemShape s({3, 2, 3});
  auto w = swap_operator(s, 0, 2);
  CHECK((w.matrix() - w.matrix().adjoint()).norm() == 0.0);
  CHECK((w.matrix() * w.matrix().adjoint() - Matrix::Identity(18, 18)).norm() == 0.0);

  // tr{(A (x) B) V} = tr(AB), 100 random trials
  std::mt19937_64 rng(4);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    int d = 2 + t % 3;
    Matrix a = random_hermitian(d, rng), b = random_hermitian(d, rng);
    const Matrix ms[] = {a, b};
    Matrix vab = kron_matrices(ms) * swap_matrix({d, d}, 0, 1).cast<Complex>();
    worst = std::max(worst, std::abs(vab.trace() - (a * b).trace()));
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("symmetric subspace isometry") {
  CHECK(sym_isometry(2, 2).cols() == 3);
  CHECK(sym_isometry(2, 3).cols() == 4);
  RealMatrix e = sym_isometry(3, 2);
  CHECK(e.cols() == 6);
  CHECK((e.transpose() * e - RealMatrix::Identity(6, 6)).norm() < 1e-14);

  // columns span exactly the +1 eigenspace of every adjacent swap
  for (auto [d, n] : {std::pair{2, 3}, std::pair{3, 3}, std::pair{2, 4}}) {
    RealMatrix iso = sym_isometry(d, n);
    CHECK(iso.cols() == binomial(n + d - 1, d - 1));
    std::vector<int> dims(n, d);
    RealMatrix proj = iso * iso.transpose();
    RealMatrix avg = RealMatrix::Zero(proj.rows(), proj.cols());
    for (int k = 0; k + 1 < n; ++k) {
      RealMatrix v = swap_matrix(dims, k, k + 1);
      CHECK((v * iso - iso).norm() < 1e-13);
    }
    // symmetrizer built from all adjacent swaps has the same range
    RealMatrix sym = RealMatrix::Identity(proj.rows(), proj.cols());
    for (int it = 0; it < 200; ++it)
      for (int k = 0; k + 1 < n; ++k)
        sym = 0.5 * (sym + swap_matrix(dims, k, k + 1) * sym);
    CHECK((sym - proj).norm() < 1e-8);
  }
  auto basis = occupation_basis(2, 2);
  CHECK(basis == std::vector<std::vector<int>>{{0, 2}, {1, 1}, {2, 0}});
}

TEST_CASE("herm_eig") {
  Matrix d = Matrix::Zero(2, 2);
  d(0, 0) = 1;
  d(1, 1) = 3;
  auto e = herm_eig(d);
  CHECK(e.values(0) == doctest::Approx(3));
  CHECK(e.values(1) == doctest::Approx(1));

  Matrix x = Matrix::Zero(2, 2);
  x(0, 1) = x(1, 0) = 1;
  auto ex = herm_eig(x);
  CHECK(ex.values(0) == doctest::Approx(1));
  CHECK(ex.values(1) == doctest::Approx(-1));
  CHECK(std::abs(std::abs(ex.vectors(0, 0)) - 1 / std::sqrt(2.0)) < 1e-12);
  CHECK(std::abs(ex.vectors(0, 0) - ex.vectors(1, 0)) < 1e-12);

  std::mt19937_64 rng(5);
  Matrix h = random_hermitian(8, rng);
  auto eh = herm_eig(h);
  Matrix rec = eh.vectors * eh.values.cast<Complex>().asDiagonal() * eh.vectors.adjoint();
  CHECK((h - rec).norm() <= 1e-10 * h.norm());
  for (int i = 0; i + 1 < 8; ++i) CHECK(eh.values(i) >= eh.values(i + 1));
}

TEST_CASE("shape validation") {
  CHECK_THROWS_AS(SubsystemShape({2, 0}), LinalgError);
  Matrix nh = Matrix::Zero(2, 2);
  nh(0, 1) = 1;
  CHECK_THROWS_AS(HermitianOperator(SubsystemShape({2}), nh), LinalgError);
  const int bad[] = {3};
  CHECK_THROWS_AS(partial_trace(HermitianOperator::identity(SubsystemShape({2, 2})), bad),
                  LinalgError);
}
