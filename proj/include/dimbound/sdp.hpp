#pragma once

// Standard-form semidefinite programs and an embedded primal-dual
// interior-point solver.
//
//   primal:  maximize <C, X>  s.t.  <A_i, X> = b_i,  X = diag(X_1..X_k) >= 0
//   dual:    minimize b'y     s.t.  Z = sum_i y_i A_i - C >= 0
//
// Coefficient matrices are stored sparsely as upper-triangle entries
// (row <= col); an off-diagonal entry stands for both (row,col) and its
// mirror, so <A, X> picks it up twice.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dimbound::sdp {

using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

enum class Field { Real, Complex };

struct Block {
  int size = 0;
  Field field = Field::Real;
};

struct Entry {
  int block = 0;
  int row = 0;  // row <= col
  int col = 0;
  double value = 0.0;
  double imag = 0.0;  // complex blocks only; entry is value + i*imag at (row,col)
};

struct Constraint {
  std::vector<Entry> coeffs;
  double rhs = 0.0;
};

struct SdpProblem {
  std::vector<Block> blocks;
  std::vector<Constraint> constraints;
  std::vector<Entry> objective;

  bool is_real() const;
  // Throws std::invalid_argument when an invariant is broken.
  void check() const;
};

struct Tolerances {
  double gap = 1e-8;          // relative duality gap
  double feasibility = 1e-8;  // relative primal/dual residuals
  int max_iterations = 120;
  bool verbose = false;
};

enum class Status { Optimal, NearOptimal, Infeasible, NumericalFailure };

std::string to_string(Status s);

struct SdpSolution {
  Status status = Status::NumericalFailure;
  std::vector<RealMatrix> X;  // primal blocks (real problems; complex blocks embedded)
  std::vector<RealMatrix> Z;  // dual slack blocks
  RealVector y;
  double primal_objective = 0.0;
  double dual_objective = 0.0;
  double gap = 0.0;               // dual - primal
  double relative_gap = 0.0;
  double primal_residual = 0.0;   // max_i |<A_i,X> - b_i|
  double dual_residual = 0.0;     // max |(sum y_i A_i - C - Z)_jk|
  int iterations = 0;
  double seconds = 0.0;
  std::string diagnostics;
};

// Solves with the embedded interior-point method. Complex blocks are embedded
// first; the returned X/Z blocks are those of the embedded real problem.
SdpSolution solve(const SdpProblem& problem, const Tolerances& tol = {});

// Solves through an external SDPA-format solver named by the environment
// variable DIMBOUND_SDP_SOLVER (called as `<exe> <in.dat-s> <out>`; objective
// values are read from its standard output). Returns nullopt when unset.
std::optional<SdpSolution> solve_external(const SdpProblem& problem);

SdpProblem embed_complex(const SdpProblem& problem);

// Drops exact duplicate constraint rows and empty rows. Throws when two
// identical rows carry different right-hand sides (the program is infeasible).
SdpProblem drop_duplicate_constraints(const SdpProblem& problem);
// Indices of the rows drop_duplicate_constraints keeps, in order.
std::vector<int> kept_constraint_rows(const SdpProblem& problem);

void export_sdpa(const SdpProblem& problem, const std::filesystem::path& path);
SdpProblem import_sdpa(const std::filesystem::path& path);

struct ValidationReport {
  double gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  std::vector<double> min_eigenvalues;  // per X block
  std::vector<int> flagged_blocks;      // blocks with min eig < -feasibility tol
  bool ok() const { return flagged_blocks.empty(); }
};

ValidationReport validate_solution(const SdpProblem& problem,
                                   const SdpSolution& solution,
                                   double feasibility_tol = 1e-8);

// <A, X> for a sparse coefficient list against dense real blocks.
double inner(const std::vector<Entry>& coeffs, const std::vector<RealMatrix>& X);

// Dense real symmetric matrix of one block of a sparse coefficient list.
RealMatrix dense_block(const std::vector<Entry>& coeffs, int block, int size);

}  // namespace dimbound::sdp
