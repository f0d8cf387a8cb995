#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "dimbound/bell.hpp"

using namespace dimbound;
using namespace dimbound::bell;

namespace {

// Brute-force local bound of a correlator functional over +-1 assignments.
double correlator_local(const CorrelatorForm& c) {
  const int ma = static_cast<int>(c.M.rows()), mb = static_cast<int>(c.M.cols());
  double best = -1e300;
  for (int sa = 0; sa < (1 << ma); ++sa)
    for (int sb = 0; sb < (1 << mb); ++sb) {
      double v = c.constant;
      for (int x = 0; x < ma; ++x) {
        double ax = (sa >> x & 1) ? -1 : 1;
        v += c.alice(x) * ax;
        for (int y = 0; y < mb; ++y) v += c.M(x, y) * ax * ((sb >> y & 1) ? -1 : 1);
      }
      for (int y = 0; y < mb; ++y) v += c.bob(y) * ((sb >> y & 1) ? -1 : 1);
      best = std::max(best, v);
    }
  return best;
}

// The tripartite inequality written out for deterministic outcome-0
// indicators d[party][setting], summed over all orderings of the parties.
double i333_deterministic(const int d[3][3]) {
  const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  // every distinct image of a term counts once: a same-setting pair term is
  // hit by two orderings of its parties, so it is halved in the loop below
  double v = 0;
  for (int p = 0; p < 3; ++p) v += -d[p][0] - 2 * d[p][2];
  for (const auto& q : perms) {
    const int* A = d[q[0]];
    const int* B = d[q[1]];
    v += 0.5 * (A[0] * B[0] - 2 * A[1] * B[1] - 2 * A[2] * B[2]) - A[0] * B[1] + A[0] * B[2] + 2 * A[1] * B[2];
  }
  return v;
}

Matrix proj(double theta, int outcome) {
  // real qubit projector in the X-Z plane
  qlinalg::Vector v(2);
  v << std::cos(theta / 2), std::sin(theta / 2);
  Matrix p = v * v.adjoint();
  return outcome == 0 ? p : Matrix(Matrix::Identity(2, 2) - p);
}

Strategy qubit_pair(const Matrix& rho, std::vector<double> ta, std::vector<double> tb) {
  Strategy s;
  s.dims = {2, 2};
  s.state = rho;
  s.measurements.resize(2);
  for (double t : ta) s.measurements[0].push_back({proj(t, 0), proj(t, 1)});
  for (double t : tb) s.measurements[1].push_back({proj(t, 0), proj(t, 1)});
  return s;
}

Matrix singlet() {
  qlinalg::Vector v = qlinalg::Vector::Zero(4);
  v(1) = 1 / std::sqrt(2.0);
  v(2) = -1 / std::sqrt(2.0);
  return v * v.adjoint();
}

}  // namespace

TEST_CASE("declared local bounds match exact enumeration") {
  for (const auto& name : builtin_names()) {
    if (name == "witness") continue;
    std::optional<double> param;
    if (name == "I3322_tilted") {
      if (!std::filesystem::exists(default_data_dir() / "i3322_tilted_base.json")) continue;
      param = 0.7;
    }
    auto f = builtin(name, param);
    REQUIRE(f.declared_local_bound.has_value());
    CAPTURE(name);
    CHECK(local_bound(f) == doctest::Approx(*f.declared_local_bound).epsilon(1e-12));
  }
}

TEST_CASE("correlator local bounds against brute force") {
  for (const char* name : {"CHSH", "I44", "M47", "M48", "M412", "I3322", "I4422"}) {
    auto f = builtin(name);
    CAPTURE(name);
    CHECK(local_bound(f) == doctest::Approx(correlator_local(to_correlators(f))).epsilon(1e-12));
  }
  CHECK(local_bound(builtin("CHSH")) == doctest::Approx(2.0));
  CHECK(local_bound(builtin("M48")) == doctest::Approx(12.0));
  auto zero = from_correlators(Eigen::MatrixXd::Zero(3, 2), {}, {});
  CHECK(local_bound(zero) == 0.0);
}

TEST_CASE("tripartite inequality: local bound and symmetry") {
  auto f = builtin("I333");
  double best = -1e300;
  for (int m = 0; m < 512; ++m) {
    int d[3][3];
    for (int i = 0; i < 9; ++i) d[i / 3][i % 3] = (m >> i) & 1;
    double oracle = i333_deterministic(d);
    best = std::max(best, oracle);
    std::vector<std::vector<int>> assign(3, std::vector<int>(3));
    for (int p = 0; p < 3; ++p)
      for (int x = 0; x < 3; ++x) assign[p][x] = d[p][x] ? 0 : 1;
    REQUIRE(evaluate(f, deterministic_table(f.scenario, assign)) == doctest::Approx(oracle));
  }
  CHECK(best == 0.0);
  CHECK(local_bound(f) == 0.0);
  // invariant under every permutation of the parties
  for (const auto& [t, c] : f.coefficients) {
    std::vector<int> q{0, 1, 2};
    do {
      Term img{std::vector<int>(3), std::vector<int>(3)};
      for (int p = 0; p < 3; ++p) {
        img.settings[q[p]] = t.settings[p];
        img.outcomes[q[p]] = t.outcomes[p];
      }
      auto it = f.coefficients.find(img);
      REQUIRE(it != f.coefficients.end());
      CHECK(it->second == c);
    } while (std::next_permutation(q.begin(), q.end()));
  }
}

TEST_CASE("correlator and Collins-Gisin round trips") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> u(-3, 3);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd M(3, 4);
    Eigen::VectorXd a(3), b(4);
    for (int i = 0; i < 12; ++i) M(i) = u(rng);
    for (int i = 0; i < 3; ++i) a(i) = u(rng);
    for (int i = 0; i < 4; ++i) b(i) = u(rng);
    auto f = from_correlators(M, a, b);
    auto c = to_correlators(f);
    CHECK((c.M - M).norm() < 1e-12);
    CHECK((c.alice - a).norm() < 1e-12);
    CHECK((c.bob - b).norm() < 1e-12);
    CHECK(std::abs(c.constant) < 1e-12);
    auto g = from_collins_gisin(f.scenario, to_collins_gisin(f));
    // the two representations agree on random local points
    std::vector<std::vector<int>> assign{{0, 1, 1}, {1, 0, 0, 1}};
    for (int k = 0; k < 8; ++k) {
      for (auto& party : assign)
        for (auto& o : party) o = u(rng) > 0;
      auto t = deterministic_table(f.scenario, assign);
      CHECK(evaluate(f, t) == doctest::Approx(evaluate(g, t)));
    }
  }
}

TEST_CASE("deterministic tables never exceed the local bound") {
  std::mt19937_64 rng(3);
  for (const char* name : {"I3322", "I44", "M47", "I4422"}) {
    auto f = builtin(name);
    double L = local_bound(f);
    for (int k = 0; k < 200; ++k) {
      std::vector<std::vector<int>> assign;
      for (int p = 0; p < f.scenario.parties(); ++p) {
        auto& row = assign.emplace_back();
        for (int x = 0; x < f.scenario.settings(p); ++x)
          row.push_back(std::uniform_int_distribution<int>(0, f.scenario.outcome_count(p, x) - 1)(rng));
      }
      CHECK(evaluate(f, deterministic_table(f.scenario, assign)) <= L + 1e-12);
    }
  }
}

TEST_CASE("Born-rule tables") {
  const double pi = std::acos(-1.0);
  auto chsh = builtin("CHSH");
  // singlet: E(a, b) = -cos(a - b); flip Bob's outcomes via angle shifts
  auto s = qubit_pair(singlet(), {0, pi / 2}, {pi + pi / 4, pi - pi / 4});
  CHECK(evaluate(chsh, strategy_to_table(s)) == doctest::Approx(2 * std::sqrt(2.0)).epsilon(1e-12));

  auto mixed = qubit_pair(Matrix::Identity(4, 4) / 4, {0.3, 1.1}, {2.0, -0.4});
  auto t = strategy_to_table(mixed);
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) CHECK(t.prob({x, y}, {0, 0}) == doctest::Approx(0.25));
  CHECK(evaluate(chsh, t) == doctest::Approx(0.0).epsilon(1e-12));

  // product state factorizes
  Matrix ra = proj(0.7, 0), rb = proj(2.1, 0);
  Matrix rho = qlinalg::kron_matrices(std::vector<Matrix>{ra, rb});
  auto prod = qubit_pair(rho, {0.2, 1.5}, {0.9, 2.8});
  auto tp = strategy_to_table(prod);
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          double pa = (ra * prod.measurements[0][x][a]).trace().real();
          double pb = (rb * prod.measurements[1][y][b]).trace().real();
          CHECK(tp.prob({x, y}, {a, b}) == doctest::Approx(pa * pb));
        }

  auto bad = mixed;
  bad.measurements[0][0][0] *= 1.1;
  CHECK_THROWS_AS(strategy_to_table(bad), BellError);
}

TEST_CASE("coefficient files") {
  auto dir = std::filesystem::temp_directory_path() / "dimbound_test_bell";
  std::filesystem::create_directories(dir);
  auto i44 = builtin("I44");
  for (const char* form : {"full", "correlator", "collins-gisin"}) {
    save_functional(i44, dir / "f.json", form);
    auto g = load_functional(dir / "f.json");
    CAPTURE(form);
    CHECK(local_bound(g) == doctest::Approx(5.0));
    auto c1 = to_correlators(i44), c2 = to_correlators(g);
    CHECK((c1.M - c2.M).norm() < 1e-12);
    CHECK((c1.alice - c2.alice).norm() < 1e-12);
    CHECK(g.declared_local_bound == 5.0);
  }
  auto i333 = builtin("I333");
  save_functional(i333, dir / "g.json");
  CHECK(load_functional(dir / "g.json").coefficients == i333.coefficients);

  CHECK_THROWS_AS(parse_functional("{"), BellError);
  CHECK_THROWS_AS(parse_functional(R"({"scenario":{"parties":2,"settings":[2,2]},"form":"weird","coefficients":[]})"),
                  BellError);
  CHECK_THROWS_AS(parse_functional(R"({"scenario":{"parties":2,"settings":[2,2]},"coefficients":[[0,0,0]]})"),
                  BellError);
  CHECK_THROWS_AS(load_functional(dir / "missing.json"), BellError);
  CHECK_THROWS_AS(builtin("nope"), BellError);
  CHECK_THROWS_AS(builtin("I4422", std::nullopt, dir), BellError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("transcribed correlator matrices") {
  auto c = to_correlators(builtin("M412"));
  REQUIRE(c.M.rows() == 4);
  REQUIRE(c.M.cols() == 12);
  // every column is a difference/sum of two unit rows: exactly two nonzeros
  for (int y = 0; y < 12; ++y) CHECK((c.M.col(y).array() != 0).count() == 2);
  auto i44 = to_correlators(builtin("I44"));
  CHECK(i44.alice(0) == 1.0);
  CHECK(i44.M(1, 1) == -1.0);
  CHECK(i44.M(3, 3) == -1.0);
}
