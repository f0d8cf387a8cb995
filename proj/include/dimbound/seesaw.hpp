#pragma once

// See-saw lower bounds: alternate exact optimization of the state (top
// eigenvector of the Bell operator) and of each projective measurement
// (eigenspace assignment at a fixed rank profile).

#include <cstdint>
#include <random>
#include <vector>

#include "dimbound/bell.hpp"

namespace dimbound::seesaw {

using bell::BellFunctional;
using bell::Matrix;
using bell::Strategy;
using qlinalg::Vector;

// ranks[party][setting][outcome]; ranks of one setting sum to the local dimension.
struct RankProfile {
  std::vector<std::vector<std::vector<int>>> ranks;

  static RankProfile nondegenerate(const bell::Scenario& s, const std::vector<int>& dims);
  bool degenerate() const;
  void check(const bell::Scenario& s, const std::vector<int>& dims) const;
  std::string describe() const;
};

// All profiles with at most `max_degenerate` degenerate settings (a rank-0 or
// full-rank outcome) among `parties`; the non-degenerate profile comes first.
std::vector<RankProfile> enumerate_profiles(const bell::Scenario& s, const std::vector<int>& dims,
                                            const std::vector<int>& parties, int max_degenerate = 1);

struct Options {
  int restarts = 50;
  int max_iterations = 2000;
  double tol = 1e-10;
  std::uint64_t seed = 20130401;
  bool real = false;  // restrict to real states and measurements (X-Z plane for qubits)
  bool fix_state = false;  // optimize measurements only (iterate keeps the given state)
};

// Top eigenvector of the Bell operator for fixed measurements.
std::pair<Vector, double> optimal_state(const BellFunctional& f, const Strategy& s);

// Conditioned operators G_a = tr_others[psi psi^dag (sum c * other ops)] for
// one party and setting; the value is sum_a tr(G_a Pi_a) + const.
std::vector<Matrix> conditioned_operators(const BellFunctional& f, const Strategy& s,
                                          const Vector& psi, int party, int setting);

// Replaces one measurement by the best projective one with the given ranks.
void optimal_measurement(const BellFunctional& f, Strategy& s, const Vector& psi, int party,
                         int setting, const std::vector<int>& ranks);

// Projective measurement from conditioned operators (exposed for tests).
std::vector<Matrix> best_projective(const std::vector<Matrix>& G, const std::vector<int>& ranks,
                                    const std::vector<Matrix>& start);

Matrix haar_unitary(int d, std::mt19937_64& rng, bool real);
Strategy random_strategy(const bell::Scenario& sc, const std::vector<int>& dims,
                         const RankProfile& profile, std::mt19937_64& rng, bool real);

struct RestartTrace {
  double initial = 0.0;
  double final = 0.0;
  int iterations = 0;
  int monotonicity_violations = 0;
};

struct RunResult {
  Strategy best;
  double value = -1e300;          // re-evaluated through the probability table
  double operator_value = -1e300; // <psi|B|psi> at the end of the iteration
  RankProfile profile;
  std::vector<RestartTrace> traces;
  std::vector<std::pair<std::string, double>> per_profile;
};

// Improves a given strategy until convergence (returns the trace).
RestartTrace iterate(const BellFunctional& f, Strategy& s, const RankProfile& profile,
                     const Options& opt);

RunResult run(const BellFunctional& f, const std::vector<int>& dims,
              const std::vector<RankProfile>& profiles, const Options& opt = {});

// ---- prepare-and-measure witness ----

enum class MeasurementClass { General, Unentangled };

struct PrepareMeasureStrategy {
  std::vector<Vector> alice;  // preparations rho_x = |a_x><a_x|
  std::vector<Vector> bob;    // preparations sigma_y
  Matrix M0;                  // POVM element announced as c = 0, on C_A (x) C_B
};

struct PrepareMeasureResult {
  PrepareMeasureStrategy best;
  double value = -1e300;
};

// sum_xy c_xy tr(rho_x (x) sigma_y M0) for the witness coefficient matrix.
double prepare_measure_value(const Eigen::MatrixXd& c, const PrepareMeasureStrategy& s);
Eigen::MatrixXd witness_matrix(const BellFunctional& witness);

// Qubit preparations; the unentangled class uses M0 = |a><a|(x)|b1><b1| +
// |a'><a'|(x)|b2><b2| with <a|a'> = 0 (either port first).
PrepareMeasureResult run_prepare_measure(const Eigen::MatrixXd& c, MeasurementClass cls,
                                         const Options& opt = {});

}  // namespace dimbound::seesaw
