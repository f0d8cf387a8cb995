#include "dimbound/lmi.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace dimbound::sdp {

RealVector Lmi::expand(const RealVector& reduced) const {
  RealVector v(original_variables);
  for (int k = 0; k < original_variables; ++k) {
    double s = subst_constant[k];
    for (auto [j, c] : subst[k]) s += c * reduced(j);
    v(k) = s;
  }
  return v;
}

RealVector Lmi::reduce(const RealVector& original) const {
  RealVector r(reduced_variables());
  for (int j = 0; j < reduced_variables(); ++j) r(j) = original(free_variables[j]);
  return r;
}

std::vector<RealMatrix> Lmi::blocks_at(const RealVector& reduced) const {
  std::vector<RealMatrix> out;
  for (const auto& b : problem.blocks) out.push_back(RealMatrix::Zero(b.size, b.size));
  auto put = [&](const Entry& e, double x) {
    out[e.block](e.row, e.col) += x;
    if (e.row != e.col) out[e.block](e.col, e.row) += x;
  };
  for (const auto& e : problem.objective) put(e, -e.value);
  for (int j = 0; j < reduced_variables(); ++j)
    for (const auto& e : problem.constraints[j].coeffs) put(e, reduced(j) * e.value);
  return out;
}

int LmiBuilder::add_variable(double bound) {
  bounds_.push_back(bound);
  return static_cast<int>(bounds_.size()) - 1;
}

int LmiBuilder::add_block(int size, double trace_bound, std::string label) {
  if (size < 1) throw std::invalid_argument("block side must be positive");
  sizes_.push_back(size);
  trace_bounds_.push_back(trace_bound);
  labels_.push_back(std::move(label));
  return static_cast<int>(sizes_.size()) - 1;
}

void LmiBuilder::add(int block, int row, int col, int var, double coeff) {
  if (coeff == 0.0) return;
  if (block < 0 || block >= blocks()) throw std::out_of_range("LMI block index");
  if (row < 0 || col < 0 || row >= sizes_[block] || col >= sizes_[block])
    throw std::out_of_range("LMI entry index");
  if (var >= variables()) throw std::out_of_range("LMI variable index");
  if (row > col) std::swap(row, col);
  terms_.push_back({block, row, col, var, coeff});
}

void LmiBuilder::add_equality(std::vector<std::pair<int, double>> terms, double rhs) {
  equalities_.emplace_back(std::move(terms), rhs);
}

void LmiBuilder::add_objective(int var, double coeff) {
  if (var < 0) objective_constant_ += coeff;
  else objective_[var] += coeff;
}

Lmi LmiBuilder::build() const {
  const int nv = variables();
  // occurrence counts steer pivot choice towards low fill-in
  std::vector<int> occurrences(nv, 0);
  for (const auto& t : terms_)
    if (t.var >= 0) ++occurrences[t.var];

  // eliminated[v]: v = constant + sum coeff * other
  std::vector<std::map<int, double>> expr(nv);
  std::vector<double> expr_const(nv, 0.0);
  std::vector<char> eliminated(nv, 0);

  for (const auto& [terms, rhs0] : equalities_) {
    std::map<int, double> row;
    double rhs = rhs0;
    for (auto [v, c] : terms) {
      if (eliminated[v]) {
        rhs -= c * expr_const[v];
        for (auto [w, d] : expr[v]) row[w] += c * d;
      } else {
        row[v] += c;
      }
    }
    double maxc = 0.0;
    for (auto it = row.begin(); it != row.end();) {
      if (std::abs(it->second) < 1e-13) it = row.erase(it);
      else {
        maxc = std::max(maxc, std::abs(it->second));
        ++it;
      }
    }
    if (row.empty()) {
      if (std::abs(rhs) > 1e-10) throw std::invalid_argument("inconsistent linear equalities");
      continue;
    }
    int pivot = -1;
    for (auto [v, c] : row)
      if (std::abs(c) >= 0.1 * maxc &&
          (pivot < 0 || occurrences[v] < occurrences[pivot]))
        pivot = v;
    double cp = row[pivot];
    std::map<int, double> e;
    for (auto [v, c] : row)
      if (v != pivot) e[v] = -c / cp;
    double ec = rhs / cp;
    // substitute the pivot inside earlier expressions
    for (int v = 0; v < nv; ++v) {
      if (!eliminated[v]) continue;
      auto it = expr[v].find(pivot);
      if (it == expr[v].end()) continue;
      double c = it->second;
      expr[v].erase(it);
      expr_const[v] += c * ec;
      for (auto [w, d] : e) {
        double& slot = expr[v][w];
        slot += c * d;
        if (std::abs(slot) < 1e-15) expr[v].erase(w);
      }
    }
    expr[pivot] = std::move(e);
    expr_const[pivot] = ec;
    eliminated[pivot] = 1;
  }

  // expanded affine form of each term over free variables
  auto expand = [&](int var, double coeff, auto&& sink) {
    if (var < 0) {
      sink(-1, coeff);
    } else if (eliminated[var]) {
      if (expr_const[var] != 0.0) sink(-1, coeff * expr_const[var]);
      for (auto [w, d] : expr[var]) sink(w, coeff * d);
    } else {
      sink(var, coeff);
    }
  };

  std::vector<char> used(nv, 0);
  for (const auto& t : terms_)
    expand(t.var, t.coeff, [&](int w, double) { if (w >= 0) used[w] = 1; });

  // objective over free variables
  std::map<int, double> obj;
  double obj_const = objective_constant_;
  for (auto [v, c] : objective_)
    expand(v, c, [&](int w, double x) {
      if (w < 0) obj_const += x;
      else obj[w] += x;
    });
  for (auto [w, c] : obj)
    if (!used[w] && std::abs(c) > 1e-14)
      throw std::invalid_argument("objective depends on an unconstrained variable");

  std::vector<int> reduced(nv, -1);
  Lmi lmi;
  lmi.original_variables = nv;
  int m = 0;
  for (int v = 0; v < nv; ++v)
    if (!eliminated[v] && used[v]) {
      reduced[v] = m++;
      lmi.free_variables.push_back(v);
      lmi.reduced_bounds.push_back(bounds_[v]);
    }
  lmi.subst.resize(nv);
  lmi.subst_constant.assign(nv, 0.0);
  for (int v = 0; v < nv; ++v) {
    if (eliminated[v]) {
      lmi.subst_constant[v] = expr_const[v];
      for (auto [w, d] : expr[v])
        if (reduced[w] >= 0) lmi.subst[v].emplace_back(reduced[w], d);
    } else if (reduced[v] >= 0) {
      lmi.subst[v].emplace_back(reduced[v], 1.0);
    }
  }

  // assemble: per reduced variable a coefficient list; constants form G0
  using Key = std::tuple<int, int, int>;
  std::vector<std::map<Key, double>> G(m);
  std::map<Key, double> G0;
  for (const auto& t : terms_)
    expand(t.var, t.coeff, [&](int w, double x) {
      Key k{t.block, t.row, t.col};
      if (w < 0) G0[k] += x;
      else G[reduced[w]][k] += x;
    });

  SdpProblem& p = lmi.problem;
  for (int s : sizes_) p.blocks.push_back({s, Field::Real});
  for (auto& [k, x] : G0)
    if (x != 0.0) p.objective.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), -x, 0.0});
  p.constraints.resize(m);
  for (int j = 0; j < m; ++j)
    for (auto& [k, x] : G[j])
      if (std::abs(x) > 1e-15)
        p.constraints[j].coeffs.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), x, 0.0});
  for (auto [w, c] : obj)
    if (reduced[w] >= 0) p.constraints[reduced[w]].rhs = -c;
  lmi.objective_constant = obj_const;
  lmi.trace_bounds = trace_bounds_;
  return lmi;
}

double certified_upper_bound(const Lmi& lmi, const std::vector<RealMatrix>& X) {
  const SdpProblem& p = lmi.problem;
  // -<C, X> = <G0, X>
  double bound = lmi.objective_constant - inner(p.objective, X);
  for (std::size_t k = 0; k < p.constraints.size(); ++k) {
    double r = inner(p.constraints[k].coeffs, X) - p.constraints[k].rhs;
    bound += lmi.reduced_bounds[k] * std::abs(r);
  }
  for (std::size_t b = 0; b < X.size(); ++b) {
    if (X[b].rows() == 0) continue;
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(0.5 * (X[b] + X[b].transpose()),
                                                 Eigen::EigenvaluesOnly);
    double lmin = es.eigenvalues()(0);
    if (lmin < 0.0) bound += -lmin * lmi.trace_bounds[b];
  }
  return bound;
}

LmiResult solve_lmi(const Lmi& lmi, const Tolerances& tol) {
  LmiResult res;
  res.sdp = solve(lmi.problem, tol);
  res.variables = lmi.expand(res.sdp.y);
  // f.y = -b.y
  res.value = lmi.objective_constant - res.sdp.dual_objective;
  res.dual_value = lmi.objective_constant - res.sdp.primal_objective;
  res.certified_upper = certified_upper_bound(lmi, res.sdp.X);
  return res;
}

}  // namespace dimbound::sdp
