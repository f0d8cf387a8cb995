#pragma once

// Expanded bodies: untrusted parties are replaced by words of their unknown
// projectors and the relaxation variable becomes the generalized moment
// matrix Gamma, whose (s, t) block is a D x D matrix C[t^dag s] on the
// trusted space (head (x) legs of every trusted party). D = 1 is plain NPA.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dimbound/bell.hpp"
#include "dimbound/heads_legs.hpp"
#include "dimbound/lmi.hpp"

namespace dimbound::relax {

struct Letter {
  int party = 0;
  int setting = 0;
  int outcome = 0;
  auto operator<=>(const Letter&) const = default;
};

// Canonical sequence: letters grouped by party (cross-party letters
// commute), each party's subsequence reduced by idempotence.
struct Word {
  std::vector<Letter> letters;
  auto operator<=>(const Word&) const = default;
  int length() const { return static_cast<int>(letters.size()); }
  bool identity() const { return letters.empty(); }
  std::string str() const;
};

// nullopt for a null sequence (two adjacent different outcomes of one setting).
std::optional<Word> canonical_word(std::vector<Letter> raw);
Word dagger(const Word& w);
std::optional<Word> multiply(const Word& a, const Word& b);

// Canonical non-null words of length <= n over `parties` (first outcomes
// only: the last outcome of every setting is left out), identity first,
// then by length and lexicographically.
// With per_party > 0 each party contributes at most that many letters
// (per_party = 1 gives the "1 + AB + ABC" style local levels).
std::vector<Word> enumerate_words(const bell::Scenario& s, const std::vector<int>& parties, int n,
                                  int per_party = 0);

struct CompileOptions {
  // refuse to build when the moment matrix side would exceed this
  long long max_side = 6000;
  // largest number of free variables accepted (Schur complement memory)
  long long max_variables = 40000;
  // cap on the letters of one party inside a word (0 = no cap)
  int per_party = 0;
};

struct CompiledRelaxation {
  std::string kind;  // "heads_legs", "hybrid", "npa", "witness"
  sdp::Lmi lmi;
  DiagramSpec diagram;
  std::vector<PartyLayout> trusted;
  std::vector<int> untrusted;
  int order = 0;
  int D = 1;
  std::vector<Word> words;

  // identification classes: canonical word -> storage
  struct ClassInfo {
    Word word;
    int rep = 0;           // class whose variables store this one
    bool transposed = false;  // C[word] = C[rep]^T
    bool symmetric = false;
  };
  std::vector<ClassInfo> classes;
  std::map<Word, int> class_of;
  std::vector<std::vector<int>> class_vars;  // per rep class: D*D variable ids (-1 = zero)
  std::vector<unsigned long long> sector;    // charge key of each trusted basis vector

  std::vector<std::string> caveats;
  std::string summary;

  // D x D block C[w] at an original-variable point (zero for null words).
  RealMatrix moment(const RealVector& variables, const Word& w) const;
  // The full matrix Gamma (side D * words).
  RealMatrix gamma(const RealVector& variables) const;
  long long side() const { return static_cast<long long>(D) * static_cast<long long>(words.size()); }
};

// Trusted parties from the diagram, every other party expanded to order n.
CompiledRelaxation compile_hybrid(const DiagramSpec& diagram, const bell::BellFunctional& f, int n,
                                  const CompileOptions& opt = {});

// No trusted party: NPA moment matrix of order n.
CompiledRelaxation compile_npa(const bell::BellFunctional& f, int n, const CompileOptions& opt = {});

// Order-2 hybrid on the untrusted side; refuses (RelaxError carrying the
// predicted side) when the estimate exceeds opt.max_side.
CompiledRelaxation second_order_hybrid(const DiagramSpec& diagram, const bell::BellFunctional& f,
                                       const CompileOptions& opt = {});

// Predicted side of the moment matrix without building it.
long long predicted_side(const DiagramSpec& diagram, const bell::Scenario& s, int n, int per_party = 0);

struct RelaxationResult {
  sdp::LmiResult lmi;
  double value = 0.0;        // relaxation objective at the solver point
  double upper_bound = 0.0;  // certified upper bound
  bool ok = false;
  std::string status;
};

RelaxationResult solve_relaxation(const CompiledRelaxation& c, const sdp::Tolerances& tol = {});

// Variables of the relaxation at an explicit strategy (trusted parties'
// measurements are rotated so that the fixed projector is standard). Throws
// RelaxError when the strategy's ranks do not match the layout.
RealVector forward_build(const CompiledRelaxation& c, const bell::Strategy& s);

// Maximum violation of the LMI blocks (negative min eigenvalue) and of the
// equality constraints at an original-variable point.
struct FeasibilityReport {
  double min_eigenvalue = 0.0;
  double equality_residual = 0.0;
  double objective = 0.0;
};
FeasibilityReport check_point(const CompiledRelaxation& c, const RealVector& variables);

// Certificate extraction from a moment matrix (Gram vectors -> projectors).
struct Certificate {
  int rank = 0;
  qlinalg::RealMatrix vectors;  // Gram vectors psi_(k,s) as columns
  qlinalg::RealVector state;    // sum_k |k> (x) |psi_(k,I)>
  // projectors on the reconstructed space, [untrusted index][setting][outcome]
  std::vector<std::vector<std::vector<RealMatrix>>> projectors;
  double moment_error = 0.0;        // max |reconstructed - Gamma| over all word pairs
  double orthogonality_error = 0.0;  // max ||E_b E_b'|| within a setting
  double probability_error = 0.0;    // vs the probabilities read from Gamma
  bool ok = false;
  std::string report;
};
Certificate extract_certificate(const CompiledRelaxation& c, const RealVector& variables,
                                double floor = 1e-9, double tol = 1e-7);

// Functional with one measurement of one party replaced by a fixed outcome
// (a degenerate measurement); the setting is removed from the scenario.
bell::BellFunctional fix_outcome(const bell::BellFunctional& f, int party, int setting, int outcome);

}  // namespace dimbound::relax
