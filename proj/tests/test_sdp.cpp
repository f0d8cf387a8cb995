#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "dimbound/lmi.hpp"
#include "dimbound/sdp.hpp"

using namespace dimbound::sdp;

namespace {

SdpProblem trace_one(int n, std::vector<Entry> objective, Field field = Field::Real) {
  SdpProblem p;
  p.blocks.push_back({n, field});
  Constraint tr;
  for (int i = 0; i < n; ++i) tr.coeffs.push_back({0, i, i, 1.0, 0.0});
  tr.rhs = 1.0;
  p.constraints.push_back(tr);
  p.objective = std::move(objective);
  return p;
}

}  // namespace

TEST_CASE("trivial programs") {
  auto p = trace_one(2, {{0, 0, 0, 1.0}, {0, 1, 1, 1.0}});
  auto s = solve(p);
  CHECK(s.status == Status::Optimal);
  CHECK(s.primal_objective == doctest::Approx(1.0).epsilon(1e-8));

  auto q = trace_one(2, {{0, 0, 0, 1.0}, {0, 1, 1, -1.0}});
  auto t = solve(q);
  CHECK(t.status == Status::Optimal);
  CHECK(t.primal_objective == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(t.dual_objective >= t.primal_objective - 1e-9);
  auto rep = validate_solution(q, t);
  CHECK(rep.primal_residual < 1e-8);
  CHECK(rep.ok());
}

TEST_CASE("top eigenvalue of random symmetric objectives") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 5;
    RealMatrix c(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) c(i, j) = c(j, i) = g(rng);
    std::vector<Entry> obj;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) obj.push_back({0, i, j, c(i, j)});
    auto s = solve(trace_one(n, obj));
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(c);
    CHECK(s.status == Status::Optimal);
    CHECK(std::abs(s.primal_objective - es.eigenvalues()(n - 1)) < 1e-7);
    CHECK(s.dual_objective >= s.primal_objective - 1e-9);
  }
}

TEST_CASE("infeasible program is flagged, not thrown") {
  SdpProblem p;
  p.blocks.push_back({1, Field::Real});
  p.constraints.push_back({{{0, 0, 0, 1.0}}, -1.0});  // x = -1, x >= 0
  p.objective.push_back({0, 0, 0, 1.0});
  auto s = solve(p);
  CHECK((s.status == Status::Infeasible || s.status == Status::NumericalFailure));

  SdpProblem dup;
  dup.blocks.push_back({1, Field::Real});
  dup.constraints.push_back({{{0, 0, 0, 1.0}}, 1.0});
  dup.constraints.push_back({{{0, 0, 0, 1.0}}, 2.0});
  CHECK(solve(dup).status == Status::Infeasible);
}

TEST_CASE("duplicate rows are dropped") {
  auto p = trace_one(2, {{0, 0, 1, 1.0}});
  p.constraints.push_back(p.constraints[0]);
  CHECK(drop_duplicate_constraints(p).constraints.size() == 1);
  auto s = solve(p);
  CHECK(s.status == Status::Optimal);
  CHECK(s.primal_objective == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("complex embedding") {
  // 1x1 complex block -> 2x2 real block
  SdpProblem one;
  one.blocks.push_back({1, Field::Complex});
  one.constraints.push_back({{{0, 0, 0, 2.0}}, 1.0});
  auto e = embed_complex(one);
  CHECK(e.blocks[0].size == 2);
  CHECK(e.constraints[0].coeffs.size() == 2);
  CHECK(e.constraints[0].coeffs[0].value == 1.0);

  // real data in a complex block: optimum unchanged
  auto pr = trace_one(2, {{0, 0, 0, 1.0}, {0, 1, 1, -1.0}}, Field::Complex);
  auto sr = solve(pr);
  CHECK(sr.primal_objective == doctest::Approx(1.0).epsilon(1e-8));

  // random 3x3 Hermitian objectives: compare to the complex top eigenvalue
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::MatrixXcd h(3, 3);
    std::vector<Entry> obj;
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) {
        double re = g(rng), im = i == j ? 0.0 : g(rng);
        h(i, j) = {re, im};
        h(j, i) = {re, -im};
        obj.push_back({0, i, j, re, im});
      }
    auto p = trace_one(3, obj, Field::Complex);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
    // tr(H X) with X Hermitian uses H(j,i) X(i,j): compare against the eigenvalue
    auto s = solve(p);
    CHECK(std::abs(s.primal_objective - es.eigenvalues()(2)) < 1e-7);
  }
}

TEST_CASE("SDPA export and import") {
  auto dir = std::filesystem::temp_directory_path();
  SdpProblem p;
  p.blocks = {{2, Field::Real}, {3, Field::Real}};
  p.objective = {{0, 0, 1, 1.0 / 3.0}, {1, 2, 2, -std::sqrt(2.0)}};
  p.constraints.push_back({{{0, 0, 0, 1.0}, {1, 0, 2, 0.1}}, 1.0 / 7.0});
  p.constraints.push_back({{{1, 1, 1, 3e-17}}, std::exp(1.0)});
  auto path = dir / "dimbound_roundtrip.dat-s";
  export_sdpa(p, path);
  auto q = import_sdpa(path);
  REQUIRE(q.blocks.size() == 2);
  REQUIRE(q.constraints.size() == 2);
  CHECK(q.blocks[1].size == 3);
  for (std::size_t i = 0; i < p.constraints.size(); ++i) {
    CHECK(q.constraints[i].rhs == p.constraints[i].rhs);
    REQUIRE(q.constraints[i].coeffs.size() == p.constraints[i].coeffs.size());
    for (std::size_t k = 0; k < p.constraints[i].coeffs.size(); ++k) {
      CHECK(q.constraints[i].coeffs[k].value == p.constraints[i].coeffs[k].value);
      CHECK(q.constraints[i].coeffs[k].row == p.constraints[i].coeffs[k].row);
      CHECK(q.constraints[i].coeffs[k].col == p.constraints[i].coeffs[k].col);
    }
  }
  CHECK(q.objective[0].value == p.objective[0].value);
  CHECK(q.objective[1].value == p.objective[1].value);

  // small file layout: 4 header lines plus nonzeros
  SdpProblem small = trace_one(2, {{0, 0, 1, 1.0}});
  export_sdpa(small, path);
  std::ifstream in(path);
  int lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  CHECK(lines == 4 + 1 + 2);
  std::filesystem::remove(path);
}

TEST_CASE("validation flags negative eigenvalues") {
  auto p = trace_one(2, {{0, 0, 0, 1.0}});
  SdpSolution s;
  s.X = {RealMatrix::Identity(2, 2) * 0.5};
  s.y = RealVector::Zero(1);
  auto ok = validate_solution(p, s);
  CHECK(ok.primal_residual == 0.0);
  CHECK(ok.ok());
  s.X[0](1, 1) = -1e-3;
  auto bad = validate_solution(p, s);
  CHECK_FALSE(bad.ok());
  CHECK(bad.flagged_blocks == std::vector<int>{0});
}

TEST_CASE("LMI builder with elimination") {
  // maximize the off-diagonal of a 2x2 density matrix
  LmiBuilder b;
  int a = b.add_variable(), c = b.add_variable(), o = b.add_variable();
  int blk = b.add_block(2, 1.0);
  b.add(blk, 0, 0, a, 1.0);
  b.add(blk, 1, 1, c, 1.0);
  b.add(blk, 0, 1, o, 1.0);
  b.add_equality({{a, 1.0}, {c, 1.0}}, 1.0);
  b.add_objective(o, 2.0);
  auto lmi = b.build();
  CHECK(lmi.reduced_variables() == 2);
  auto r = solve_lmi(lmi);
  CHECK(r.converged());
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(r.certified_upper >= 1.0 - 1e-9);
  CHECK(r.certified_upper == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.variables(a) + r.variables(c) == doctest::Approx(1.0));
}

TEST_CASE("LMI block splitting keeps the optimum") {
  // two decoupled 2x2 blocks written as one 4x4 block
  LmiBuilder b;
  std::vector<int> v;
  for (int i = 0; i < 6; ++i) v.push_back(b.add_variable());
  int blk = b.add_block(4, 2.0);
  b.add(blk, 0, 0, v[0], 1.0);
  b.add(blk, 1, 1, v[1], 1.0);
  b.add(blk, 0, 1, v[2], 1.0);
  b.add(blk, 2, 2, v[3], 1.0);
  b.add(blk, 3, 3, v[4], 1.0);
  b.add(blk, 2, 3, v[5], 1.0);
  b.add_equality({{v[0], 1.0}, {v[1], 1.0}}, 1.0);
  b.add_equality({{v[3], 1.0}, {v[4], 1.0}}, 1.0);
  b.add_objective(v[2], 1.0);
  b.add_objective(v[5], -1.0);
  b.add_objective(v[0], 0.5);
  auto r = solve_lmi(b.build());
  // first part: top eigenvalue of [[1/2, 1/2], [1/2, 0]]; second part: 1/2
  double expect = (1.0 + std::sqrt(5.0)) / 4.0 + 0.5;
  CHECK(r.value == doctest::Approx(expect).epsilon(1e-7));
}
