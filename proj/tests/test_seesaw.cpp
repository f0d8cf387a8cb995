#include <cmath>
#include <random>

#include "doctest.h"
#include "dimbound/seesaw.hpp"

using namespace dimbound;
using namespace dimbound::seesaw;

namespace {

Matrix pauli_z() {
  Matrix z = Matrix::Zero(2, 2);
  z(0, 0) = 1;
  z(1, 1) = -1;
  return z;
}

// Value of a strategy computed straight from the Born rule, term by term.
double born_value(const BellFunctional& f, const Strategy& s) {
  double v = 0;
  for (const auto& [t, c] : f.coefficients) {
    Matrix op = Matrix::Ones(1, 1);
    for (std::size_t p = 0; p < s.dims.size(); ++p) {
      Matrix m = t.settings[p] < 0 ? Matrix(Matrix::Identity(s.dims[p], s.dims[p]))
                                   : s.measurements[p][t.settings[p]][t.outcomes[p]];
      op = qlinalg::kron_matrices(std::vector<Matrix>{op, m});
    }
    v += c * (s.state * op).trace().real();
  }
  return v;
}

}  // namespace

TEST_CASE("rank profiles") {
  auto sc = bell::Scenario::bipartite(2, 2);
  auto base = RankProfile::nondegenerate(sc, {2, 3});
  CHECK(base.ranks[0][0] == std::vector<int>{1, 1});
  CHECK(base.ranks[1][1] == std::vector<int>{1, 2});
  CHECK_FALSE(base.degenerate());
  auto all = enumerate_profiles(sc, {2, 2}, {0, 1}, 1);
  // non-degenerate + 2 degenerate choices per setting
  CHECK(all.size() == 1 + 4 * 2);
  for (std::size_t i = 1; i < all.size(); ++i) CHECK(all[i].degenerate());
  RankProfile bad = base;
  bad.ranks[0][0] = {2, 1};
  CHECK_THROWS(bad.check(sc, {2, 3}));
}

TEST_CASE("exact partial updates") {
  // dichotomic qubit with G0 - G1 = Z selects |0><0|
  std::vector<Matrix> G{pauli_z(), Matrix::Zero(2, 2)};
  auto P = best_projective(G, {1, 1}, {});
  CHECK(std::abs(P[0](0, 0) - 1.0) < 1e-12);
  CHECK(std::abs(P[1](1, 1) - 1.0) < 1e-12);
  auto D = best_projective(G, {0, 2}, {});
  CHECK(D[0].norm() < 1e-12);
  CHECK((D[1] - Matrix::Identity(2, 2)).norm() < 1e-12);

  // three outcomes: compare the re-splitting with a brute-force search over
  // computational-basis assignments when every G is diagonal
  std::vector<Matrix> G3(3, Matrix::Zero(3, 3));
  double w[3][3] = {{0.2, 1.0, 0.1}, {0.9, 0.3, 0.0}, {0.1, 0.2, 0.8}};
  for (int a = 0; a < 3; ++a)
    for (int i = 0; i < 3; ++i) G3[a](i, i) = w[a][i];
  std::vector<Matrix> start(3, Matrix::Zero(3, 3));
  for (int a = 0; a < 3; ++a) start[a](a, a) = 1;
  auto P3 = best_projective(G3, {1, 1, 1}, start);
  double got = 0;
  for (int a = 0; a < 3; ++a) got += (G3[a] * P3[a]).trace().real();
  CHECK(got == doctest::Approx(1.0 + 0.9 + 0.8));

  // zero functional: every state has value 0
  bell::BellFunctional zero;
  zero.scenario = bell::Scenario::bipartite(2, 2);
  std::mt19937_64 rng(1);
  auto s = random_strategy(zero.scenario, {2, 2}, RankProfile::nondegenerate(zero.scenario, {2, 2}), rng, false);
  CHECK(std::abs(optimal_state(zero, s).second) < 1e-12);
}

TEST_CASE("conditioned operators reproduce the value") {
  std::mt19937_64 rng(7);
  auto f = bell::builtin("I333");
  std::vector<int> dims{2, 3, 2};
  auto prof = RankProfile::nondegenerate(f.scenario, dims);
  for (int trial = 0; trial < 5; ++trial) {
    auto s = random_strategy(f.scenario, dims, prof, rng, false);
    qlinalg::Vector psi = qlinalg::herm_eig(s.state).vectors.col(0);
    double total = psi.dot(bell::bell_operator(f, s) * psi).real();
    for (int p = 0; p < 3; ++p) {
      auto G = conditioned_operators(f, s, psi, p, 1);
      // the setting-1 part of the value, computed directly
      bell::BellFunctional part;
      part.scenario = f.scenario;
      for (const auto& [t, c] : f.coefficients)
        if (t.settings[p] == 1) part.add(t, c);
      double direct = born_value(part, s);
      double via = 0;
      for (std::size_t a = 0; a < G.size(); ++a) via += (G[a] * s.measurements[p][1][a]).trace().real();
      CHECK(via == doctest::Approx(direct).epsilon(1e-10));
    }
    CHECK(total == doctest::Approx(born_value(f, s)).epsilon(1e-10));
  }
}

TEST_CASE("CHSH and I3322 optima") {
  Options o;
  o.restarts = 10;
  auto chsh = bell::builtin("CHSH");
  auto r = run(chsh, {2, 2}, {RankProfile::nondegenerate(chsh.scenario, {2, 2})}, o);
  CHECK(r.value == doctest::Approx(2 * std::sqrt(2.0)).epsilon(1e-8));

  auto f = bell::builtin("I3322");
  auto q = run(f, {2, 2}, {RankProfile::nondegenerate(f.scenario, {2, 2})}, o);
  CHECK(q.value == doctest::Approx(0.25).epsilon(1e-4));
  for (const auto& t : q.traces) {
    CHECK(t.monotonicity_violations == 0);
    CHECK(t.final >= t.initial - 1e-12);
  }
  CHECK_NOTHROW(q.best.check());
  CHECK(std::abs(q.value - born_value(f, q.best)) < 1e-9);
  CHECK(std::abs(q.value - q.operator_value) < 1e-9);
}

TEST_CASE("tripartite qubit lower bound") {
  Options o;
  o.restarts = 10;
  o.real = true;
  auto f = bell::builtin("I333");
  auto r = run(f, {2, 2, 2}, {RankProfile::nondegenerate(f.scenario, {2, 2, 2})}, o);
  CHECK(r.value == doctest::Approx(0.0443484).epsilon(1e-4));
  CHECK_NOTHROW(r.best.check());
}

TEST_CASE("fixed-state measurement optimization") {
  auto f = bell::builtin("I333");
  std::vector<int> dims{3, 3, 3};
  qlinalg::Vector psi = bell::symmetric_qutrit_state(0.2519038);
  CHECK(psi.norm() == doctest::Approx(1.0));
  Options o;
  o.fix_state = true;
  o.real = true;
  std::mt19937_64 rng(5);
  auto prof = RankProfile::nondegenerate(f.scenario, dims);
  double best = -1;
  for (int r = 0; r < 10; ++r) {
    auto s = random_strategy(f.scenario, dims, prof, rng, true);
    s.state = psi * psi.adjoint();
    auto tr = iterate(f, s, prof, o);
    CHECK(tr.monotonicity_violations == 0);
    // the state is untouched
    CHECK(std::abs(psi.dot(s.state * psi).real() - 1.0) < 1e-12);
    best = std::max(best, bell::evaluate(f, bell::strategy_to_table(s)));
  }
  CHECK(best == doctest::Approx(0.1841287).epsilon(1e-5));
}

TEST_CASE("prepare-and-measure witness") {
  auto c = witness_matrix(bell::builtin("witness"));
  CHECK(c(0, 2) == 1.0);
  CHECK(c(1, 1) == 0.0);
  Options o;
  o.restarts = 20;
  auto gen = run_prepare_measure(c, MeasurementClass::General, o);
  CHECK(gen.value == doctest::Approx(2.5).epsilon(1e-6));
  auto un = run_prepare_measure(c, MeasurementClass::Unentangled, o);
  CHECK(un.value == doctest::Approx((2 + 3 * std::sqrt(6.0)) / 4).epsilon(1e-6));
  // returned strategies reproduce their values; M0 is a projector
  CHECK(prepare_measure_value(c, un.best) == doctest::Approx(un.value));
  CHECK((un.best.M0 * un.best.M0 - un.best.M0).norm() < 1e-9);
  // an unentangled M0 stays PPT
  Matrix pt = qlinalg::partial_transpose(un.best.M0, {2, 2}, std::vector<int>{1});
  CHECK(qlinalg::herm_eig(pt).values.minCoeff() > -1e-9);
}
