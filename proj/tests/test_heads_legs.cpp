#include <cmath>
#include <random>

#include "doctest.h"
#include "dimbound/moment_relax.hpp"
#include "dimbound/seesaw.hpp"

using namespace dimbound;
using namespace dimbound::relax;

namespace {

qlinalg::Vector random_unit(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  qlinalg::Vector v(d);
  for (int i = 0; i < d; ++i) v(i) = qlinalg::Complex(g(rng), g(rng));
  return v.normalized();
}

DiagramSpec two_qubits(const bell::Scenario& s, const std::string& ppt) {
  DiagramSpec d;
  d.trusted.push_back({0, 2, {}, {}, true});
  d.trusted.push_back({1, 2, {}, {}, true});
  d.ppt_groups = ppt_schedule(d, s, ppt);
  return d;
}

double solve_value(const CompiledRelaxation& c) {
  auto r = solve_relaxation(c);
  REQUIRE(r.ok);
  return r.upper_bound;
}

}  // namespace

TEST_CASE("pseudo-measurements reproduce overlaps") {
  std::mt19937_64 rng(7);
  qlinalg::SubsystemShape shape({2, 2});
  for (int trial = 0; trial < 20; ++trial) {
    qlinalg::Vector a = random_unit(2, rng), phi = random_unit(2, rng);
    Matrix rho = a * a.adjoint();
    Matrix leg = phi * phi.adjoint();
    Matrix joint = qlinalg::kron_matrices(std::vector<Matrix>{rho, leg});
    const double overlap = std::norm(phi.dot(a));
    for (int out = 0; out < 2; ++out) {
      auto op = pseudo_measurement(shape, 0, 1, out);
      const double v = (joint * op.matrix()).trace().real();
      CHECK(v == doctest::Approx(out == 0 ? overlap : 1.0 - overlap).epsilon(1e-12));
    }
  }
}

TEST_CASE("party layouts") {
  auto f = bell::builtin("I3322");
  auto L = build_party_layout({0, 2, {}, {}, true}, f.scenario);
  // the last setting is fixed, the other two carry one leg each
  CHECK(L.fixed_setting == 2);
  CHECK(L.legs.size() == 2);
  CHECK(L.factor_dims == std::vector<int>{2, 2, 2});
  for (const auto& setting : L.ops) {
    RealMatrix sum = RealMatrix::Zero(L.dim, L.dim);
    for (const auto& op : setting) sum += op;
    CHECK((sum - RealMatrix::Identity(L.dim, L.dim)).norm() < 1e-12);
  }
  auto L3 = build_party_layout({0, 2, {1, 3, 1}, {}, true}, f.scenario);
  CHECK(L3.factor_dims == std::vector<int>{2, 2, 4});

  CHECK_THROWS_AS(build_party_layout({0, 2, {}, {{1, 1}, {2, 1}, {1, 1}}, true}, f.scenario), RelaxError);
  CHECK_THROWS_AS(build_party_layout({5, 2, {}, {}, true}, f.scenario), RelaxError);
}

TEST_CASE("PPT schedules are nested") {
  auto f = bell::builtin("I3322");
  auto basic = ppt_schedule(two_qubits(f.scenario, "none"), f.scenario, "basic");
  auto pairs = ppt_schedule(two_qubits(f.scenario, "none"), f.scenario, "pairs");
  auto legs = ppt_schedule(two_qubits(f.scenario, "none"), f.scenario, "legs");
  for (const auto& g : basic) CHECK(std::find(pairs.begin(), pairs.end(), g) != pairs.end());
  CHECK(legs.size() >= pairs.size());
  for (const auto& g : legs)
    for (const auto& c : g) CHECK(c.setting >= 0);
  CHECK_THROWS_AS(ppt_schedule(two_qubits(f.scenario, "none"), f.scenario, "everything"), RelaxError);
}

TEST_CASE("forward-built points are feasible and reproduce the Born value") {
  auto f = bell::builtin("I3322");
  auto c = compile(two_qubits(f.scenario, "legs"), f);
  std::mt19937_64 rng(11);
  auto profile = seesaw::RankProfile::nondegenerate(f.scenario, {2, 2});
  for (int trial = 0; trial < 10; ++trial) {
    auto s = seesaw::random_strategy(f.scenario, {2, 2}, profile, rng, trial % 2 == 0);
    auto v = forward_build(c, s);
    auto rep = check_point(c, v);
    CHECK(rep.min_eigenvalue > -1e-10);
    CHECK(rep.equality_residual < 1e-10);
    CHECK(rep.objective == doctest::Approx(bell::evaluate(f, bell::strategy_to_table(s))).epsilon(1e-10));
  }
}

TEST_CASE("relaxation values are monotone in the PPT schedule") {
  auto f = bell::builtin("I3322");
  const double none = solve_value(compile(two_qubits(f.scenario, "none"), f));
  const double basic = solve_value(compile(two_qubits(f.scenario, "basic"), f));
  const double pairs = solve_value(compile(two_qubits(f.scenario, "pairs"), f));
  const double legs = solve_value(compile(two_qubits(f.scenario, "legs"), f));
  CHECK(basic <= none + 1e-6);
  CHECK(pairs <= basic + 1e-6);
  CHECK(legs <= pairs + 1e-6);
  CHECK(legs == doctest::Approx(0.25).epsilon(1e-4));
  // without any PPT image the pseudo-measurements need not be positive
  CHECK(none > 1.0);
}

TEST_CASE("relaxation values are monotone in the leg length") {
  auto f = bell::builtin("I3322");
  double prev = 1e9;
  for (int len = 1; len <= 2; ++len) {
    DiagramSpec d;
    d.trusted.push_back({0, 2, {len, len, len}, {}, true});
    d.ppt_groups = ppt_schedule(d, f.scenario, "basic");
    const double v = solve_value(compile_hybrid(d, f, 1));
    CHECK(v <= prev + 1e-6);
    CHECK(v >= 0.25 - 1e-6);
    prev = v;
  }
}

TEST_CASE("extension map") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  SUBCASE("trace preservation") {
    for (int n = 1; n <= 4; ++n) {
      const int sd = static_cast<int>(qlinalg::binomial(n + 1, 1));
      Matrix x(2 * sd, 2 * sd);
      for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < x.cols(); ++j) x(i, j) = qlinalg::Complex(g(rng), g(rng));
      x = x * x.adjoint();
      Matrix y = apply_extension_map(x, 2, 2, n);
      CHECK(y.rows() == 4);
      CHECK(std::abs(y.trace() - x.trace()) < 1e-10);
    }
  }
  SUBCASE("agrees with the map on the full tensor space") {
    for (int n = 1; n <= 4; ++n) {
      const int d = 2 + n % 2, pre = 2;
      RealMatrix iso = qlinalg::kron_real(RealMatrix::Identity(pre, pre), qlinalg::sym_isometry(d, n));
      Matrix x = Matrix::Random(iso.cols(), iso.cols());
      x = x * x.adjoint();
      Matrix full = iso.cast<qlinalg::Complex>() * x * iso.transpose().cast<qlinalg::Complex>();
      std::vector<int> dims{pre};
      for (int c = 0; c < n; ++c) dims.push_back(d);
      Matrix expect = double(n) / (n + d) * qlinalg::partial_trace(full, dims, std::vector<int>{0, 1}) +
                      1.0 / (n + d) * qlinalg::kron_matrices(std::vector<Matrix>{
                                          qlinalg::partial_trace(full, dims, std::vector<int>{0}), Matrix::Identity(d, d)});
      CHECK((apply_extension_map(x, pre, d, n) - expect).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
  SUBCASE("Haar sampling agrees with the depolarizing form") {
    // binom(N+d-1, N) E_phi[<phi^N|X|phi^N>] |phi><phi| for d = 2, N = 2
    const int d = 2, n = 2;
    RealMatrix iso = qlinalg::sym_isometry(d, n);
    Matrix x(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) x(i, j) = qlinalg::Complex(g(rng), g(rng));
    x = x * x.adjoint();
    x /= x.trace().real();
    Matrix acc = Matrix::Zero(d, d);
    const int samples = 100000;
    for (int k = 0; k < samples; ++k) {
      qlinalg::Vector phi = random_unit(d, rng);
      qlinalg::Vector pp = iso.transpose().cast<qlinalg::Complex>() * qlinalg::kron_matrices(std::vector<Matrix>{phi, phi});
      acc += (pp.adjoint() * x * pp)(0, 0).real() * phi * phi.adjoint();
    }
    acc *= static_cast<double>(qlinalg::binomial(n + d - 1, n)) / samples;
    Matrix exact = apply_extension_map(x, 1, d, n);
    CHECK((acc - exact).cwiseAbs().maxCoeff() < 1e-2);
  }
}

TEST_CASE("rounding a solved relaxation gives a valid strategy") {
  auto f = bell::builtin("I3322");
  auto c = compile(two_qubits(f.scenario, "pairs"), f);
  auto r = solve_relaxation(c);
  REQUIRE(r.ok);
  auto rr = round_to_strategy(c, r.lmi.variables, f);
  rr.strategy.check(1e-8);
  CHECK(rr.value >= 0.24);
  CHECK(rr.value <= r.upper_bound + 1e-8);
}

TEST_CASE("rounding recovers a product point") {
  auto f = bell::builtin("CHSH");
  auto c = compile(two_qubits(f.scenario, "legs"), f);
  std::mt19937_64 rng(5);
  auto s = seesaw::random_strategy(f.scenario, {2, 2}, seesaw::RankProfile::nondegenerate(f.scenario, {2, 2}), rng,
                                   true);
  auto rr = round_to_strategy(c, forward_build(c, s), f);
  CHECK(rr.value >= bell::evaluate(f, bell::strategy_to_table(s)) - 1e-8);
}

TEST_CASE("prepare-and-measure witness relaxations") {
  auto c = seesaw::witness_matrix(bell::builtin("witness"));
  SUBCASE("general measurements") {
    WitnessOptions o;
    o.ppt = "basic";
    const double basic = solve_value(compile_prepare_measure(c, WitnessMode::General, o));
    o.ppt = "pairs";
    const double pairs = solve_value(compile_prepare_measure(c, WitnessMode::General, o));
    CHECK(pairs <= basic + 1e-6);
    // never below the see-saw value
    CHECK(pairs >= 2.5 - 1e-6);
  }
  SUBCASE("unentangled rank-2 measurements") {
    WitnessOptions o;
    auto cr = compile_prepare_measure(c, WitnessMode::Unentangled, o);
    CHECK(!cr.caveats.empty());
    CHECK(solve_value(cr) == doctest::Approx((2 + 3 * std::sqrt(6.0)) / 4).epsilon(2e-3));
  }
  SUBCASE("bad input") {
    CHECK_THROWS_AS(compile_prepare_measure(Eigen::MatrixXd::Ones(2, 3), WitnessMode::General), RelaxError);
    WitnessOptions o;
    o.leg_length = 2;
    CHECK_THROWS_AS(compile_prepare_measure(c, WitnessMode::General, o), RelaxError);
  }
}
