#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "dimbound/bell.hpp"

#ifndef DIMBOUND_DATA_DIR
#define DIMBOUND_DATA_DIR "data"
#endif

namespace dimbound::bell {

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("DIMBOUND_DATA_DIR"); env && *env) return env;
  return DIMBOUND_DATA_DIR;
}

BellFunctional symmetrize_parties(const BellFunctional& f, bool orbit) {
  const int n = f.scenario.parties();
  for (int p = 1; p < n; ++p)
    if (f.scenario.outcomes[p] != f.scenario.outcomes[0])
      throw BellError("symmetrization needs identical local scenarios");
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  BellFunctional out;
  out.name = f.name;
  out.scenario = f.scenario;
  for (const auto& [t, c] : f.coefficients) {
    std::set<Term> seen;
    std::vector<int> q = perm;
    do {
      // party p's letter moves to party q[p]
      Term img{std::vector<int>(n, -1), std::vector<int>(n, -1)};
      for (int p = 0; p < n; ++p) {
        img.settings[q[p]] = t.settings[p];
        img.outcomes[q[p]] = t.outcomes[p];
      }
      if (orbit && !seen.insert(img).second) continue;
      out.add(img, c);
    } while (std::next_permutation(q.begin(), q.end()));
  }
  return out;
}

qlinalg::Vector symmetric_qutrit_state(double alpha) {
  qlinalg::Vector psi = qlinalg::Vector::Zero(27);
  std::vector<int> p{0, 1, 2};
  do {
    psi(9 * p[0] + 3 * p[1] + p[2]) = std::cos(alpha) / std::sqrt(6.0);
  } while (std::next_permutation(p.begin(), p.end()));
  psi(26) = std::sin(alpha);
  return psi;
}

namespace {

Eigen::MatrixXd rows_to_matrix(std::initializer_list<std::initializer_list<double>> rows) {
  Eigen::MatrixXd m(rows.size(), rows.begin()->size());
  int i = 0;
  for (const auto& r : rows) {
    int j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

BellFunctional correlation_inequality(const Eigen::MatrixXd& M, std::string name, double local) {
  auto f = from_correlators(M, Eigen::VectorXd(), Eigen::VectorXd(), std::move(name));
  f.declared_local_bound = local;
  return f;
}

BellFunctional i333() {
  BellFunctional base;
  base.name = "I333";
  base.scenario = Scenario::uniform(3, 3, 2);
  // P(A_x) and P(A_x, B_y) with outcome 0; settings numbered from 0
  base.add_joint({0, -1, -1}, {0, -1, -1}, -1.0);
  base.add_joint({2, -1, -1}, {0, -1, -1}, -2.0);
  base.add_joint({0, 0, -1}, {0, 0, -1}, 1.0);
  base.add_joint({1, 1, -1}, {0, 0, -1}, -2.0);
  base.add_joint({2, 2, -1}, {0, 0, -1}, -2.0);
  base.add_joint({0, 1, -1}, {0, 0, -1}, -1.0);
  base.add_joint({0, 2, -1}, {0, 0, -1}, 1.0);
  base.add_joint({1, 2, -1}, {0, 0, -1}, 2.0);
  auto f = symmetrize_parties(base, true);
  f.declared_local_bound = 0.0;
  return f;
}

BellFunctional witness() {
  // Preparations x (Alice) and y (Bob) carry a single trivial outcome; the
  // measuring party has one dichotomic setting. Terms are P(0|x,y).
  BellFunctional f;
  f.name = "witness";
  f.scenario.outcomes = {{1, 1, 1}, {1, 1, 1}, {2}};
  const double c[3][3] = {{-1, -1, 1}, {1, 0, 1}, {1, -1, -1}};
  for (int x = 0; x < 3; ++x)
    for (int y = 0; y < 3; ++y)
      if (c[x][y] != 0.0) f.add_joint({x, y, 0}, {0, 0, 0}, c[x][y]);
  return f;
}

}  // namespace

std::vector<std::string> builtin_names() {
  return {"CHSH", "I3322", "I3322_tilted", "I4422", "I44", "M47", "M48", "M412", "I333", "witness"};
}

BellFunctional builtin(const std::string& name, std::optional<double> param,
                       const std::filesystem::path& data_dir) {
  const auto dir = data_dir.empty() ? default_data_dir() : data_dir;
  if (name == "CHSH") return correlation_inequality(rows_to_matrix({{1, 1}, {1, -1}}), "CHSH", 2.0);
  if (name == "I3322") {
    auto f = from_collins_gisin(Scenario::bipartite(3, 3),
                                rows_to_matrix({{0, -1, 0, 0},
                                                {-2, 1, 1, 1},
                                                {-1, 1, 1, -1},
                                                {0, 1, -1, 0}}),
                                "I3322");
    f.declared_local_bound = 0.0;
    return f;
  }
  if (name == "I3322_tilted") {
    // coefficients affine in eta: base + eta * slope
    auto base = load_functional(dir / "i3322_tilted_base.json");
    auto slope = load_functional(dir / "i3322_tilted_slope.json");
    double eta = param.value_or(1.0);
    if (eta < 1.0 / 3.0 - 1e-12 || eta > 1.0 + 1e-12)
      throw BellError("eta must lie in [1/3, 1]");
    BellFunctional f = base;
    for (const auto& [t, c] : slope.coefficients) f.add(t, eta * c);
    f.name = "I3322_tilted";
    f.declared_local_bound = 0.0;
    return f;
  }
  if (name == "I4422") {
    auto f = load_functional(dir / "i4422.json");
    f.name = "I4422";
    return f;
  }
  if (name == "I44") {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(4, 4);
    M(0, 0) = M(0, 1) = M(1, 0) = 1;
    M(1, 1) = -1;
    M(2, 2) = M(2, 3) = M(3, 2) = 1;
    M(3, 3) = -1;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(4);
    a(0) = 1;
    auto f = from_correlators(M, a, Eigen::VectorXd::Zero(4), "I44");
    f.declared_local_bound = 5.0;
    return f;
  }
  if (name == "M47")
    return correlation_inequality(rows_to_matrix({{1, 1, 1, 1, 0, 0, 0},
                                                  {1, -1, 0, 0, 1, 1, 0},
                                                  {1, 0, -1, 0, -1, 0, 1},
                                                  {1, 0, 0, -1, 0, -1, -1}}),
                                  "M47", 8.0);
  if (name == "M48")
    return correlation_inequality(rows_to_matrix({{1, 1, 1, 1, 1, 1, 1, 1},
                                                  {1, 1, 1, 1, -1, -1, -1, -1},
                                                  {1, 1, -1, -1, 1, 1, -1, -1},
                                                  {1, -1, 1, -1, 1, -1, 1, -1}}),
                                  "M48", 12.0);
  if (name == "M412")
    return correlation_inequality(
        rows_to_matrix({{1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0},
                        {1, -1, 0, 0, 0, 0, 1, 1, 1, 1, 0, 0},
                        {0, 0, 1, -1, 0, 0, 1, -1, 0, 0, 1, 1},
                        {0, 0, 0, 0, 1, -1, 0, 0, 1, -1, 1, -1}}),
        "M412", 12.0);
  if (name == "I333") return i333();
  if (name == "witness") return witness();
  throw BellError("unknown builtin functional '" + name + "'");
}

}  // namespace dimbound::bell
