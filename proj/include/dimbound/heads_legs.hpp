#pragma once

// Separability relaxations of dimension-bounded strategies. A trusted party
// owns a head (its d-dimensional state space) and one leg per rank-1
// measurement projector; a leg of length N lives in the symmetric subspace
// of N copies of C^d and is stored compressed through sym_isometry.
// Pseudo-measurements a*I + (-1)^a V(head, circle) turn Bell probabilities
// into linear functionals of the joint matrix W (or of the generalized
// moment matrix when some parties are expanded, see moment_relax.hpp).

#include <optional>
#include <string>
#include <vector>

#include "dimbound/bell.hpp"
#include "dimbound/lmi.hpp"
#include "dimbound/qlinalg.hpp"

namespace dimbound::relax {

using qlinalg::Matrix;
using qlinalg::RealMatrix;
using qlinalg::RealVector;

class RelaxError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A circle of a trusted party: setting < 0 designates the head; otherwise
// the leg is identified by (setting, component) where component enumerates
// the rank-1 pieces of the setting's represented outcomes.
struct Circle {
  int party = 0;
  int setting = -1;
  int component = 0;
  int copy = 0;
  auto operator<=>(const Circle&) const = default;
};

struct PartyDiagram {
  int party = 0;
  int head_dim = 2;
  std::vector<int> leg_length;          // per setting; empty = all 1
  std::vector<std::vector<int>> ranks;  // per setting rank profile; empty = non-degenerate
  bool fix_last = true;                 // last non-degenerate setting uses a fixed projector
};

struct DiagramSpec {
  std::vector<PartyDiagram> trusted;
  std::vector<std::vector<Circle>> ppt_groups;
  // Impose the orthogonality of rank-1 components on every diagonal block of
  // a moment matrix and, in strict mode, on every single-circle PPT image too.
  bool strict_orthogonality = false;
  // Use the sign-flip symmetry of every trusted party to zero entries
  // between different charge sectors (exact for the relaxations built here).
  bool symmetry = true;

  void check(const bell::Scenario& s) const;
  std::string describe() const;
};

// Layout of one trusted party's compressed space: head (x) legs.
struct Leg {
  int setting = 0;
  int outcome = 0;
  int component = 0;  // index among the legs of this setting
  int length = 1;
};

struct PartyLayout {
  int party = 0;
  int head_dim = 2;
  std::vector<Leg> legs;
  std::vector<int> factor_dims;  // compressed: head, then sym dims of legs
  int dim = 1;
  int fixed_setting = -1;
  std::vector<std::vector<int>> ranks;
  // measurement operators on the compressed party space, [setting][outcome]
  std::vector<std::vector<RealMatrix>> ops;
  // orthogonality pairs (leg indices) and their swap operators
  std::vector<std::pair<int, int>> orthogonal;
  std::vector<RealMatrix> orthogonal_ops;
  // sign-flip charges of every compressed basis vector
  std::vector<unsigned> charge;
};

PartyLayout build_party_layout(const PartyDiagram& pd, const bell::Scenario& s);

// Pseudo-measurement of a qudit head against one circle:
// a*I + (-1)^a V(head, circle), as an operator on `shape`.
qlinalg::HermitianOperator pseudo_measurement(const qlinalg::SubsystemShape& shape, int head,
                                              int circle, int outcome);

struct CompiledRelaxation;

// All parties trusted: W on the product of heads and legs.
CompiledRelaxation compile(const DiagramSpec& diagram, const bell::BellFunctional& f);

// Same with explicit rank profiles for the trusted parties ([party][setting]).
CompiledRelaxation rank_structured_compile(DiagramSpec diagram, const bell::BellFunctional& f,
                                           const std::vector<std::vector<std::vector<int>>>& profile);

// Default PPT schedules. "basic": every single leg (single circles of long
// legs) and each party's full set of legs; "pairs": additionally every pair
// of legs; "legs": every nonempty subset of legs. Heads are never transposed.
std::vector<std::vector<Circle>> ppt_schedule(const std::vector<PartyLayout>& parties,
                                              const std::string& kind);
std::vector<std::vector<Circle>> ppt_schedule(const DiagramSpec& diagram, const bell::Scenario& s,
                                              const std::string& kind);

// The depolarizing extension map on the last factor of `op`, which must be
// an operator on C^d (x) Sym^N(C^d) [given in the compressed basis]:
// N/(N+d) tr_{N-1} + d/(N+d) tr(.) I/d, mapping to C^d (x) C^d.
RealMatrix apply_extension_map(const RealMatrix& op, int prefix_dim, int d, int copies);
Matrix apply_extension_map(const Matrix& op, int prefix_dim, int d, int copies);

struct RoundingResult {
  bell::Strategy strategy;
  double value = 0.0;     // evaluate() of the rounded strategy
  bool refined = false;   // improved by see-saw from the extracted point
};

// Extracts a strategy from a solved all-trusted relaxation (product
// components of W) and polishes it with see-saw iterations.
RoundingResult round_to_strategy(const CompiledRelaxation& c, const RealVector& variables,
                                 const bell::BellFunctional& f, std::uint64_t seed = 1);

// Prepare-and-measure witness relaxations.
enum class WitnessMode { General, Unentangled };
struct WitnessOptions {
  int leg_length = 1;
  std::string ppt = "basic";
  bool transposed = false;  // unentangled: which port carries the orthogonal pair
};
CompiledRelaxation compile_prepare_measure(const Eigen::MatrixXd& c, WitnessMode mode,
                                           const WitnessOptions& opt = {});

}  // namespace dimbound::relax
