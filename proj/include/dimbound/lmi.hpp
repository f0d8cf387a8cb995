#pragma once

// Linear matrix inequalities in free-variable form:
//
//   maximize  c0 + f.v   s.t.  G0 + sum_k v_k G_k >= 0 (block diagonal),
//             linear equalities among the v_k.
//
// Relaxations are written this way (moments/state entries are the variables)
// and then mapped onto an SdpProblem whose multipliers y are the variables:
// A_k = G_k, C = -G0, b = -f. The equality-side matrix X then certifies an
// upper bound on the relaxation value.

#include <map>
#include <string>
#include <vector>

#include "dimbound/sdp.hpp"

namespace dimbound::sdp {

struct Lmi {
  SdpProblem problem;
  double objective_constant = 0.0;
  // original variable -> constant + sum coeff * reduced variable
  std::vector<double> subst_constant;
  std::vector<std::vector<std::pair<int, double>>> subst;
  std::vector<double> reduced_bounds;  // |v| bound per reduced variable
  std::vector<double> trace_bounds;    // trace bound per block
  int original_variables = 0;
  std::vector<int> free_variables;     // original index of each reduced variable

  int reduced_variables() const { return static_cast<int>(problem.constraints.size()); }
  // All original variables at a reduced point.
  RealVector expand(const RealVector& reduced) const;
  // Reduced coordinates of an original point (the free variables' values).
  RealVector reduce(const RealVector& original) const;
  // Dense LMI blocks G0 + sum v_k G_k at a reduced point.
  std::vector<RealMatrix> blocks_at(const RealVector& reduced) const;
};

class LmiBuilder {
 public:
  // `bound` is an a-priori bound on |v| valid on the feasible set.
  int add_variable(double bound = 1.0);
  int variables() const { return static_cast<int>(bounds_.size()); }

  // `trace_bound` bounds the trace of the block over the feasible set.
  int add_block(int size, double trace_bound, std::string label = {});
  int blocks() const { return static_cast<int>(sizes_.size()); }
  int block_size(int b) const { return sizes_.at(b); }
  const std::string& block_label(int b) const { return labels_.at(b); }

  // Adds coeff * v_var (var < 0: constant) at (row, col) and its mirror.
  void add(int block, int row, int col, int var, double coeff);

  void add_equality(std::vector<std::pair<int, double>> terms, double rhs);
  void add_objective(int var, double coeff);
  void add_objective_constant(double c) { objective_constant_ += c; }

  // Eliminates the equalities, drops unused variables and assembles the SDP.
  // Throws std::invalid_argument for inconsistent equalities or an unbounded
  // objective direction.
  Lmi build() const;

 private:
  struct Term {
    int block, row, col, var;
    double coeff;
  };
  std::vector<double> bounds_;
  std::vector<int> sizes_;
  std::vector<double> trace_bounds_;
  std::vector<std::string> labels_;
  std::vector<Term> terms_;
  std::vector<std::pair<std::vector<std::pair<int, double>>, double>> equalities_;
  std::map<int, double> objective_;
  double objective_constant_ = 0.0;
};

struct LmiResult {
  SdpSolution sdp;
  RealVector variables;        // original variables at the relaxation point y
  double value = 0.0;          // objective at that point (lower end of the bracket)
  double dual_value = 0.0;     // uncorrected bound from X
  double certified_upper = 0.0;  // rigorous upper bound on the relaxation optimum
  bool converged() const {
    return sdp.status == Status::Optimal || sdp.status == Status::NearOptimal;
  }
};

LmiResult solve_lmi(const Lmi& lmi, const Tolerances& tol = {});

// Certified bound for an arbitrary X (useful for externally solved programs).
double certified_upper_bound(const Lmi& lmi, const std::vector<RealMatrix>& X);

}  // namespace dimbound::sdp
