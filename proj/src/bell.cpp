#include "dimbound/bell.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

#ifndef DIMBOUND_DATA_DIR
#define DIMBOUND_DATA_DIR "data"
#endif

namespace dimbound::bell {

using json = nlohmann::json;

// ---- scenario and terms ----

Scenario Scenario::uniform(int parties, int settings, int outcomes) {
  Scenario s;
  s.outcomes.assign(parties, std::vector<int>(settings, outcomes));
  return s;
}

Scenario Scenario::bipartite(int settings_a, int settings_b, int outcomes) {
  Scenario s;
  s.outcomes = {std::vector<int>(settings_a, outcomes), std::vector<int>(settings_b, outcomes)};
  return s;
}

bool Scenario::dichotomic() const {
  for (const auto& p : outcomes)
    for (int k : p)
      if (k != 2) return false;
  return true;
}

void Scenario::check() const {
  if (outcomes.empty()) throw BellError("scenario without parties");
  for (const auto& p : outcomes) {
    if (p.empty()) throw BellError("party without settings");
    for (int k : p)
      if (k < 1) throw BellError("outcome counts must be >= 1");
  }
}

unsigned Term::mask() const {
  unsigned m = 0;
  for (std::size_t p = 0; p < settings.size(); ++p)
    if (settings[p] >= 0) m |= 1u << p;
  return m;
}

void BellFunctional::add(const Term& t, double c) {
  if (static_cast<int>(t.settings.size()) != scenario.parties() ||
      t.outcomes.size() != t.settings.size())
    throw BellError("term arity does not match the scenario");
  for (int p = 0; p < scenario.parties(); ++p) {
    if ((t.settings[p] < 0) != (t.outcomes[p] < 0)) throw BellError("malformed term");
    if (t.settings[p] < 0) continue;
    if (t.settings[p] >= scenario.settings(p) ||
        t.outcomes[p] >= scenario.outcome_count(p, t.settings[p]))
      throw BellError("term outside the scenario");
  }
  double& slot = coefficients[t];
  slot += c;
  if (slot == 0.0) coefficients.erase(t);
}

void BellFunctional::add_joint(const std::vector<int>& settings, const std::vector<int>& outcomes,
                               double c) {
  add(Term{settings, outcomes}, c);
}

Term BellFunctional::constant_term() const {
  std::vector<int> none(scenario.parties(), -1);
  return Term{none, none};
}

void BellFunctional::add_constant(double c) { add(constant_term(), c); }

// ---- probability tables ----

std::size_t ProbabilityTable::context_index(const std::vector<int>& settings) const {
  std::size_t idx = 0;
  for (int p = 0; p < scenario.parties(); ++p) idx = idx * scenario.settings(p) + settings[p];
  return idx;
}

namespace {

std::vector<int> context_of(const Scenario& s, std::size_t idx) {
  std::vector<int> x(s.parties());
  for (int p = s.parties() - 1; p >= 0; --p) {
    x[p] = static_cast<int>(idx % s.settings(p));
    idx /= s.settings(p);
  }
  return x;
}

std::size_t outcome_flat(const Scenario& s, const std::vector<int>& x, const std::vector<int>& a) {
  std::size_t idx = 0;
  for (int p = 0; p < s.parties(); ++p) idx = idx * s.outcome_count(p, x[p]) + a[p];
  return idx;
}

std::vector<int> outcome_tuple(const Scenario& s, const std::vector<int>& x, std::size_t idx) {
  std::vector<int> a(s.parties());
  for (int p = s.parties() - 1; p >= 0; --p) {
    int k = s.outcome_count(p, x[p]);
    a[p] = static_cast<int>(idx % k);
    idx /= k;
  }
  return a;
}

std::size_t context_count(const Scenario& s) {
  std::size_t n = 1;
  for (int p = 0; p < s.parties(); ++p) n *= s.settings(p);
  return n;
}

std::size_t outcome_count(const Scenario& s, const std::vector<int>& x) {
  std::size_t n = 1;
  for (int p = 0; p < s.parties(); ++p) n *= s.outcome_count(p, x[p]);
  return n;
}

}  // namespace

double ProbabilityTable::prob(const std::vector<int>& settings,
                              const std::vector<int>& outcomes) const {
  return values.at(context_index(settings)).at(outcome_flat(scenario, settings, outcomes));
}

double ProbabilityTable::term_probability(const Term& t) const {
  const int n = scenario.parties();
  std::vector<int> x(n);
  for (int p = 0; p < n; ++p) x[p] = t.settings[p] < 0 ? 0 : t.settings[p];
  const auto& row = values.at(context_index(x));
  double s = 0.0;
  for (std::size_t k = 0; k < row.size(); ++k) {
    auto a = outcome_tuple(scenario, x, k);
    bool match = true;
    for (int p = 0; p < n && match; ++p)
      if (t.outcomes[p] >= 0 && a[p] != t.outcomes[p]) match = false;
    if (match) s += row[k];
  }
  return s;
}

void ProbabilityTable::check(double tol) const {
  if (values.size() != context_count(scenario)) throw BellError("table context count mismatch");
  for (std::size_t c = 0; c < values.size(); ++c) {
    auto x = context_of(scenario, c);
    if (values[c].size() != outcome_count(scenario, x)) throw BellError("table row size mismatch");
    double sum = 0.0;
    for (double v : values[c]) {
      if (v < -tol) throw BellError("negative probability");
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol) throw BellError("table row not normalized");
  }
}

// ---- correlator and Collins-Gisin views ----

BellFunctional from_correlators(const Eigen::MatrixXd& M, const Eigen::VectorXd& alice,
                                const Eigen::VectorXd& bob, std::string name) {
  const int ma = static_cast<int>(M.rows()), mb = static_cast<int>(M.cols());
  if ((alice.size() != 0 && alice.size() != ma) || (bob.size() != 0 && bob.size() != mb))
    throw BellError("marginal vector length does not match the correlator matrix");
  BellFunctional f;
  f.name = std::move(name);
  f.scenario = Scenario::bipartite(ma, mb);
  for (int x = 0; x < ma; ++x)
    for (int y = 0; y < mb; ++y)
      if (M(x, y) != 0.0)
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) f.add_joint({x, y}, {a, b}, ((a + b) % 2 ? -1 : 1) * M(x, y));
  for (int x = 0; x < alice.size(); ++x)
    if (alice(x) != 0.0)
      for (int a = 0; a < 2; ++a) f.add_joint({x, -1}, {a, -1}, (a ? -1 : 1) * alice(x));
  for (int y = 0; y < bob.size(); ++y)
    if (bob(y) != 0.0)
      for (int b = 0; b < 2; ++b) f.add_joint({-1, y}, {-1, b}, (b ? -1 : 1) * bob(y));
  return f;
}

CorrelatorForm to_correlators(const BellFunctional& f) {
  if (f.scenario.parties() != 2 || !f.scenario.dichotomic())
    throw BellError("correlator form needs a bipartite dichotomic scenario");
  CorrelatorForm out;
  out.M = Eigen::MatrixXd::Zero(f.scenario.settings(0), f.scenario.settings(1));
  out.alice = Eigen::VectorXd::Zero(f.scenario.settings(0));
  out.bob = Eigen::VectorXd::Zero(f.scenario.settings(1));
  for (const auto& [t, c] : f.coefficients) {
    int x = t.settings[0], y = t.settings[1];
    double sa = x >= 0 ? (t.outcomes[0] ? -1.0 : 1.0) : 0.0;
    double sb = y >= 0 ? (t.outcomes[1] ? -1.0 : 1.0) : 0.0;
    if (x >= 0 && y >= 0) {
      // P(ab|xy) = (1 + sa E^A + sb E^B + sa sb E)/4
      out.constant += c / 4;
      out.alice(x) += sa * c / 4;
      out.bob(y) += sb * c / 4;
      out.M(x, y) += sa * sb * c / 4;
    } else if (x >= 0) {
      out.constant += c / 2;
      out.alice(x) += sa * c / 2;
    } else if (y >= 0) {
      out.constant += c / 2;
      out.bob(y) += sb * c / 2;
    } else {
      out.constant += c;
    }
  }
  return out;
}

std::map<Term, double> collins_gisin_terms(const BellFunctional& f) {
  std::map<Term, double> out;
  const auto& s = f.scenario;
  auto rec = [&](auto&& self, Term t, double c) -> void {
    for (int p = 0; p < s.parties(); ++p) {
      int x = t.settings[p];
      if (x < 0) continue;
      int last = s.outcome_count(p, x) - 1;
      if (t.outcomes[p] != last) continue;
      // P(.., last, ..) = P(.. party absent ..) - sum_{o<last} P(.., o, ..)
      Term without = t;
      without.settings[p] = without.outcomes[p] = -1;
      self(self, without, c);
      for (int o = 0; o < last; ++o) {
        Term with = t;
        with.outcomes[p] = o;
        self(self, with, -c);
      }
      return;
    }
    out[t] += c;
  };
  for (const auto& [t, c] : f.coefficients) rec(rec, t, c);
  std::erase_if(out, [](const auto& kv) { return std::abs(kv.second) < 1e-14; });
  return out;
}

namespace {

// (setting, outcome) -> CG row/col index; 0 is reserved for the marginal slot
std::vector<std::vector<int>> cg_index(const Scenario& s, int party) {
  std::vector<std::vector<int>> idx(s.settings(party));
  int k = 1;
  for (int x = 0; x < s.settings(party); ++x)
    for (int a = 0; a + 1 < s.outcome_count(party, x); ++a) idx[x].push_back(k++);
  return idx;
}

}  // namespace

BellFunctional from_collins_gisin(const Scenario& s, const Eigen::MatrixXd& table,
                                  std::string name) {
  if (s.parties() != 2) throw BellError("Collins-Gisin tables are bipartite");
  auto ra = cg_index(s, 0), rb = cg_index(s, 1);
  int rows = 1, cols = 1;
  for (auto& v : ra) rows += static_cast<int>(v.size());
  for (auto& v : rb) cols += static_cast<int>(v.size());
  if (table.rows() != rows || table.cols() != cols)
    throw BellError("Collins-Gisin table has the wrong shape");
  BellFunctional f;
  f.name = std::move(name);
  f.scenario = s;
  f.add_constant(table(0, 0));
  for (int x = 0; x < s.settings(0); ++x)
    for (int a = 0; a < static_cast<int>(ra[x].size()); ++a) {
      f.add_joint({x, -1}, {a, -1}, table(ra[x][a], 0));
      for (int y = 0; y < s.settings(1); ++y)
        for (int b = 0; b < static_cast<int>(rb[y].size()); ++b)
          f.add_joint({x, y}, {a, b}, table(ra[x][a], rb[y][b]));
    }
  for (int y = 0; y < s.settings(1); ++y)
    for (int b = 0; b < static_cast<int>(rb[y].size()); ++b)
      f.add_joint({-1, y}, {-1, b}, table(0, rb[y][b]));
  return f;
}

Eigen::MatrixXd to_collins_gisin(const BellFunctional& f) {
  const auto& s = f.scenario;
  if (s.parties() != 2) throw BellError("Collins-Gisin tables are bipartite");
  auto ra = cg_index(s, 0), rb = cg_index(s, 1);
  int rows = 1, cols = 1;
  for (auto& v : ra) rows += static_cast<int>(v.size());
  for (auto& v : rb) cols += static_cast<int>(v.size());
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(rows, cols);
  for (const auto& [term, c] : collins_gisin_terms(f)) {
    int x = term.settings[0], y = term.settings[1];
    int r = x >= 0 ? ra[x][term.outcomes[0]] : 0;
    int k = y >= 0 ? rb[y][term.outcomes[1]] : 0;
    t(r, k) += c;
  }
  return t;
}

// ---- local bound ----

LocalResult local_optimum(const BellFunctional& f, double cap) {
  const auto& s = f.scenario;
  s.check();
  const int n = s.parties();
  // the responder is the party with the most deterministic strategies
  std::vector<double> counts(n, 1.0);
  for (int p = 0; p < n; ++p)
    for (int x = 0; x < s.settings(p); ++x) counts[p] *= s.outcome_count(p, x);
  const int resp = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  double total = 1.0;
  for (int p = 0; p < n; ++p)
    if (p != resp) total *= counts[p];
  if (total > cap)
    throw BellError("deterministic-strategy count " + std::to_string(total) +
                    " exceeds the cap; use a factorized bound");

  std::vector<std::pair<int, int>> slots;  // enumerated (party, setting)
  for (int p = 0; p < n; ++p)
    if (p != resp)
      for (int x = 0; x < s.settings(p); ++x) slots.emplace_back(p, x);

  std::vector<std::pair<Term, double>> terms(f.coefficients.begin(), f.coefficients.end());
  std::vector<std::vector<int>> assign(n);
  for (int p = 0; p < n; ++p) assign[p].assign(s.settings(p), 0);

  LocalResult best;
  best.value = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> w(s.settings(resp));
  const auto total_count = static_cast<long long>(total);
  for (long long it = 0; it < total_count; ++it) {
    long long code = it;
    for (auto [p, x] : slots) {
      int k = s.outcome_count(p, x);
      assign[p][x] = static_cast<int>(code % k);
      code /= k;
    }
    double base = 0.0;
    for (int y = 0; y < s.settings(resp); ++y) w[y].assign(s.outcome_count(resp, y), 0.0);
    for (const auto& [t, c] : terms) {
      bool match = true;
      for (int p = 0; p < n && match; ++p)
        if (p != resp && t.settings[p] >= 0 && assign[p][t.settings[p]] != t.outcomes[p])
          match = false;
      if (!match) continue;
      if (t.settings[resp] >= 0) w[t.settings[resp]][t.outcomes[resp]] += c;
      else base += c;
    }
    double val = base;
    std::vector<int> reply(s.settings(resp));
    for (int y = 0; y < s.settings(resp); ++y) {
      auto m = std::max_element(w[y].begin(), w[y].end());
      reply[y] = static_cast<int>(m - w[y].begin());
      val += *m;
    }
    if (val > best.value + 1e-12) {
      best.value = val;
      best.assignment = assign;
      best.assignment[resp] = reply;
    }
  }
  return best;
}

double local_bound(const BellFunctional& f, double cap) { return local_optimum(f, cap).value; }

double evaluate(const BellFunctional& f, const ProbabilityTable& p) {
  if (!(f.scenario == p.scenario)) throw BellError("scenario mismatch in evaluate");
  double s = 0.0;
  for (const auto& [t, c] : f.coefficients) s += c * p.term_probability(t);
  return s;
}

ProbabilityTable deterministic_table(const Scenario& s,
                                     const std::vector<std::vector<int>>& assignment) {
  ProbabilityTable t;
  t.scenario = s;
  for (std::size_t c = 0; c < context_count(s); ++c) {
    auto x = context_of(s, c);
    std::vector<double> row(outcome_count(s, x), 0.0);
    std::vector<int> a(s.parties());
    for (int p = 0; p < s.parties(); ++p) a[p] = assignment[p][x[p]];
    row[outcome_flat(s, x, a)] = 1.0;
    t.values.push_back(std::move(row));
  }
  return t;
}

// ---- strategies ----

Scenario Strategy::scenario() const {
  Scenario s;
  for (const auto& party : measurements) {
    std::vector<int> k;
    for (const auto& setting : party) k.push_back(static_cast<int>(setting.size()));
    s.outcomes.push_back(k);
  }
  return s;
}

std::vector<std::vector<std::vector<int>>> Strategy::ranks() const {
  std::vector<std::vector<std::vector<int>>> out;
  for (const auto& party : measurements) {
    auto& po = out.emplace_back();
    for (const auto& setting : party) {
      auto& so = po.emplace_back();
      for (const auto& op : setting) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(op, Eigen::EigenvaluesOnly);
        so.push_back(static_cast<int>((es.eigenvalues().array() > 1e-7).count()));
      }
    }
  }
  return out;
}

void Strategy::check(double tol) const {
  Eigen::Index total = 1;
  for (int d : dims) total *= d;
  if (state.rows() != total || state.cols() != total) throw BellError("state dimension mismatch");
  if ((state - state.adjoint()).cwiseAbs().maxCoeff() > tol) throw BellError("state not Hermitian");
  if (std::abs(state.trace().real() - 1.0) > tol) throw BellError("state trace differs from 1");
  Eigen::SelfAdjointEigenSolver<Matrix> es(state, Eigen::EigenvaluesOnly);
  if (es.eigenvalues()(0) < -tol) throw BellError("state not positive semidefinite");
  if (measurements.size() != dims.size()) throw BellError("measurement party count mismatch");
  for (std::size_t p = 0; p < dims.size(); ++p)
    for (const auto& setting : measurements[p]) {
      Matrix sum = Matrix::Zero(dims[p], dims[p]);
      for (const auto& op : setting) {
        if (op.rows() != dims[p]) throw BellError("measurement operator dimension mismatch");
        Eigen::SelfAdjointEigenSolver<Matrix> e(op, Eigen::EigenvaluesOnly);
        if (e.eigenvalues()(0) < -tol) throw BellError("measurement operator not PSD");
        sum += op;
      }
      if ((sum - Matrix::Identity(dims[p], dims[p])).cwiseAbs().maxCoeff() > tol)
        throw BellError("measurement does not sum to identity");
    }
}

namespace {

Matrix kron_list(const std::vector<const Matrix*>& ops) {
  Matrix out = *ops[0];
  for (std::size_t k = 1; k < ops.size(); ++k) {
    const Matrix& b = *ops[k];
    Matrix next(out.rows() * b.rows(), out.cols() * b.cols());
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      for (Eigen::Index j = 0; j < out.cols(); ++j)
        next.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = out(i, j) * b;
    out = std::move(next);
  }
  return out;
}

}  // namespace

ProbabilityTable strategy_to_table(const Strategy& st, double tol) {
  st.check(tol);
  ProbabilityTable t;
  t.scenario = st.scenario();
  const auto& s = t.scenario;
  std::vector<Matrix> id;
  for (int d : st.dims) id.push_back(Matrix::Identity(d, d));
  for (std::size_t c = 0; c < context_count(s); ++c) {
    auto x = context_of(s, c);
    std::vector<double> row(outcome_count(s, x));
    for (std::size_t k = 0; k < row.size(); ++k) {
      auto a = outcome_tuple(s, x, k);
      std::vector<const Matrix*> ops;
      for (int p = 0; p < s.parties(); ++p) ops.push_back(&st.measurements[p][x[p]][a[p]]);
      row[k] = std::max(0.0, (st.state * kron_list(ops)).trace().real());
    }
    t.values.push_back(std::move(row));
  }
  return t;
}

Matrix bell_operator(const BellFunctional& f, const Strategy& st) {
  Eigen::Index total = 1;
  for (int d : st.dims) total *= d;
  Matrix B = Matrix::Zero(total, total);
  std::vector<Matrix> id;
  for (int d : st.dims) id.push_back(Matrix::Identity(d, d));
  for (const auto& [t, c] : f.coefficients) {
    std::vector<const Matrix*> ops;
    for (int p = 0; p < f.scenario.parties(); ++p)
      ops.push_back(t.settings[p] < 0 ? &id[p] : &st.measurements[p][t.settings[p]][t.outcomes[p]]);
    B += c * kron_list(ops);
  }
  return B;
}

// ---- JSON coefficient files ----

namespace {

Scenario scenario_from_json(const json& j) {
  Scenario s;
  if (j.contains("outcomes")) {
    s.outcomes = j.at("outcomes").get<std::vector<std::vector<int>>>();
  } else {
    int parties = j.at("parties").get<int>();
    auto settings = j.at("settings").get<std::vector<int>>();
    int k = j.value("outcome_count", 2);
    if (static_cast<int>(settings.size()) != parties) throw BellError("settings list length");
    for (int m : settings) s.outcomes.emplace_back(m, k);
  }
  s.check();
  return s;
}

}  // namespace

BellFunctional parse_functional(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw BellError(std::string("coefficient file: ") + e.what());
  }
  try {
    Scenario s = scenario_from_json(j.at("scenario"));
    std::string form = j.value("form", "full");
    std::string name = j.value("name", "");
    BellFunctional f;
    const auto& coeffs = j.at("coefficients");
    if (form == "full") {
      f.name = name;
      f.scenario = s;
      const int n = s.parties();
      for (const auto& row : coeffs) {
        if (static_cast<int>(row.size()) != 2 * n + 1) throw BellError("full-form row length");
        Term t{std::vector<int>(n), std::vector<int>(n)};
        for (int p = 0; p < n; ++p) {
          t.settings[p] = row[p].get<int>();
          t.outcomes[p] = row[n + p].get<int>();
        }
        f.add(t, row[2 * n].get<double>());
      }
    } else if (form == "correlator") {
      if (s.parties() != 2) throw BellError("correlator form is bipartite");
      Eigen::MatrixXd M = Eigen::MatrixXd::Zero(s.settings(0), s.settings(1));
      Eigen::VectorXd a = Eigen::VectorXd::Zero(s.settings(0)), b = Eigen::VectorXd::Zero(s.settings(1));
      double constant = 0.0;
      for (const auto& row : coeffs) {
        int x = row.at(0).get<int>(), y = row.at(1).get<int>();
        double v = row.at(2).get<double>();
        if (x >= 0 && y >= 0) M(x, y) += v;
        else if (x >= 0) a(x) += v;
        else if (y >= 0) b(y) += v;
        else constant += v;
      }
      f = from_correlators(M, a, b, name);
      if (constant != 0.0) f.add_constant(constant);
    } else if (form == "collins-gisin") {
      auto ra = cg_index(s, 0), rb = cg_index(s, 1);
      int rows = 1, cols = 1;
      for (auto& v : ra) rows += static_cast<int>(v.size());
      for (auto& v : rb) cols += static_cast<int>(v.size());
      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(rows, cols);
      for (const auto& row : coeffs) {
        int r = row.at(0).get<int>(), c = row.at(1).get<int>();
        if (r < 0 || c < 0 || r >= rows || c >= cols) throw BellError("Collins-Gisin index range");
        t(r, c) += row.at(2).get<double>();
      }
      f = from_collins_gisin(s, t, name);
    } else {
      throw BellError("unknown coefficient form '" + form + "'");
    }
    if (j.contains("local_bound") && !j["local_bound"].is_null())
      f.declared_local_bound = j["local_bound"].get<double>();
    return f;
  } catch (const json::exception& e) {
    throw BellError(std::string("coefficient file: ") + e.what());
  }
}

BellFunctional load_functional(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw BellError("missing coefficient file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_functional(ss.str());
}

void save_functional(const BellFunctional& f, const std::filesystem::path& path,
                     const std::string& form) {
  json j;
  j["name"] = f.name;
  j["scenario"] = {{"outcomes", f.scenario.outcomes}};
  j["form"] = form;
  json rows = json::array();
  if (form == "full") {
    for (const auto& [t, c] : f.coefficients) {
      json row = json::array();
      for (int x : t.settings) row.push_back(x);
      for (int a : t.outcomes) row.push_back(a);
      row.push_back(c);
      rows.push_back(row);
    }
  } else if (form == "collins-gisin") {
    Eigen::MatrixXd t = to_collins_gisin(f);
    for (int r = 0; r < t.rows(); ++r)
      for (int c = 0; c < t.cols(); ++c)
        if (t(r, c) != 0.0) rows.push_back({r, c, t(r, c)});
  } else if (form == "correlator") {
    auto cf = to_correlators(f);
    if (cf.constant != 0.0) rows.push_back({-1, -1, cf.constant});
    for (int x = 0; x < cf.alice.size(); ++x)
      if (cf.alice(x) != 0.0) rows.push_back({x, -1, cf.alice(x)});
    for (int y = 0; y < cf.bob.size(); ++y)
      if (cf.bob(y) != 0.0) rows.push_back({-1, y, cf.bob(y)});
    for (int x = 0; x < cf.M.rows(); ++x)
      for (int y = 0; y < cf.M.cols(); ++y)
        if (cf.M(x, y) != 0.0) rows.push_back({x, y, cf.M(x, y)});
  } else {
    throw BellError("unknown coefficient form '" + form + "'");
  }
  j["coefficients"] = rows;
  if (f.declared_local_bound) j["local_bound"] = *f.declared_local_bound;
  std::ofstream out(path);
  if (!out) throw BellError("cannot write " + path.string());
  out << j.dump(1) << "\n";
}

}  // namespace dimbound::bell
