#pragma once

// Bell functionals for finite scenarios: full-probability coefficients with
// participating-party masks, correlator and Collins-Gisin views, exact local
// bounds and evaluation on probability tables and explicit strategies.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dimbound/qlinalg.hpp"

namespace dimbound::bell {

using qlinalg::Matrix;

class BellError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Scenario {
  std::vector<std::vector<int>> outcomes;  // [party][setting] -> outcome count

  static Scenario uniform(int parties, int settings, int outcomes = 2);
  static Scenario bipartite(int settings_a, int settings_b, int outcomes = 2);

  int parties() const { return static_cast<int>(outcomes.size()); }
  int settings(int p) const { return static_cast<int>(outcomes.at(p).size()); }
  int outcome_count(int p, int x) const { return outcomes.at(p).at(x); }
  bool dichotomic() const;
  void check() const;
  bool operator==(const Scenario&) const = default;
};

// A probability P(outcomes | settings) over the participating parties; absent
// parties carry -1 in both vectors. All -1 is the constant term.
struct Term {
  std::vector<int> settings;
  std::vector<int> outcomes;
  auto operator<=>(const Term&) const = default;
  unsigned mask() const;
};

struct ProbabilityTable {
  Scenario scenario;
  // values[settings index][outcome index], both flattened with the last party
  // fastest (see context_index).
  std::vector<std::vector<double>> values;

  std::size_t context_index(const std::vector<int>& settings) const;
  double prob(const std::vector<int>& settings, const std::vector<int>& outcomes) const;
  // Probability of a (possibly marginal) term; absent parties use setting 0.
  double term_probability(const Term& t) const;
  void check(double tol = 1e-9) const;
};

struct BellFunctional {
  std::string name;
  Scenario scenario;
  std::map<Term, double> coefficients;
  std::optional<double> declared_local_bound;

  void add(const Term& t, double c);
  void add_joint(const std::vector<int>& settings, const std::vector<int>& outcomes, double c);
  void add_constant(double c);
  Term constant_term() const;
};

struct CorrelatorForm {
  double constant = 0.0;
  Eigen::VectorXd alice, bob;
  Eigen::MatrixXd M;
};

// E_xy = P(a=b|x,y) - P(a!=b|x,y), E^A_x = P(0|x) - P(1|x).
BellFunctional from_correlators(const Eigen::MatrixXd& M, const Eigen::VectorXd& alice,
                                const Eigen::VectorXd& bob, std::string name = {});
CorrelatorForm to_correlators(const BellFunctional& f);

// Bipartite Collins-Gisin table: row 0 holds the constant and Bob's
// marginals P(b|y) for b < k-1; column 0 holds Alice's marginals; the rest
// holds P(a,b|x,y) for non-last outcomes.
BellFunctional from_collins_gisin(const Scenario& s, const Eigen::MatrixXd& table,
                                  std::string name = {});
Eigen::MatrixXd to_collins_gisin(const BellFunctional& f);

// Canonical expansion over terms whose outcomes all differ from the last
// outcome of their setting (any number of parties); the constant term is
// included. Valid on no-signalling tables.
std::map<Term, double> collins_gisin_terms(const BellFunctional& f);

struct LocalResult {
  double value = 0.0;
  std::vector<std::vector<int>> assignment;  // [party][setting] -> outcome
};

// Exact maximum over deterministic local strategies. All parties but one are
// enumerated; the remaining one responds optimally per setting.
LocalResult local_optimum(const BellFunctional& f, double cap = 1e9);
double local_bound(const BellFunctional& f, double cap = 1e9);

double evaluate(const BellFunctional& f, const ProbabilityTable& p);

ProbabilityTable deterministic_table(const Scenario& s,
                                     const std::vector<std::vector<int>>& assignment);

// An explicit finite-dimensional strategy.
struct Strategy {
  std::vector<int> dims;
  Matrix state;  // density matrix on the joint space, Kronecker order of parties
  std::vector<std::vector<std::vector<Matrix>>> measurements;  // [party][setting][outcome]

  Scenario scenario() const;
  // Numerical ranks of every measurement operator (threshold 1e-7).
  std::vector<std::vector<std::vector<int>>> ranks() const;
  // Throws BellError when the state or a POVM violates its invariants.
  void check(double tol = 1e-9) const;
};

ProbabilityTable strategy_to_table(const Strategy& s, double tol = 1e-9);

// Bell operator sum_terms c * (tensor of measurement operators).
Matrix bell_operator(const BellFunctional& f, const Strategy& s);

// Built-in functionals: CHSH, I3322, I3322_tilted (param eta), I4422, I44,
// M47, M48, M412, I333, witness. Data-file backed entries are read from
// data_dir (default: the bundled data directory).
BellFunctional builtin(const std::string& name, std::optional<double> param = std::nullopt,
                       const std::filesystem::path& data_dir = {});
std::vector<std::string> builtin_names();
std::filesystem::path default_data_dir();

// cos(alpha)|psi_sym> + sin(alpha)|222>, with |psi_sym> the symmetric
// superposition of the six permutations of |012>.
qlinalg::Vector symmetric_qutrit_state(double alpha);

BellFunctional load_functional(const std::filesystem::path& path);
void save_functional(const BellFunctional& f, const std::filesystem::path& path,
                     const std::string& form = "full");
// Parses the JSON text of a coefficient file.
BellFunctional parse_functional(const std::string& json_text);

// Sum of the images of every term under all permutations of the parties
// (each distinct image once when `orbit` is set, otherwise once per
// permutation). All parties must share one scenario.
BellFunctional symmetrize_parties(const BellFunctional& f, bool orbit);

}  // namespace dimbound::bell
