#pragma once

// Scenario configurations, experiment drivers, result records and the table
// reproductions behind the command-line tool.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dimbound/bell.hpp"
#include "dimbound/heads_legs.hpp"
#include "dimbound/sdp.hpp"

namespace dimbound::scenarios {

using nlohmann::json;

// Thrown for malformed or inconsistent configurations (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kDefaultSeed = 20130401;

struct InequalitySpec {
  std::string builtin;           // builtin name, or empty for an inline block
  std::optional<double> param;   // eta for the tilted family
  json inline_block;             // coefficient-file JSON
  bool symmetrize = false;       // replace by the orbit sum over party permutations
};

// One upper-bound relaxation.
struct UpperSpec {
  std::string method;                   // heads_legs | hybrid | npa | witness
  int order = 1;
  int per_party = 0;
  std::vector<int> leg_length;          // per trusted party (empty = 1)
  std::vector<std::string> ppt{"basic"};  // escalation schedule
  std::optional<double> target;         // stop escalating once value <= target + tolerance
  double tolerance = 1e-4;
  // "nondegenerate" or "degenerate" (maximum over every rank profile of the
  // trusted parties)
  std::string profiles = "nondegenerate";
  // maximum over every deterministic replacement of one setting of this
  // party (-1 = off); used for degenerate qubit measurements bounded by NPA
  int fix_outcomes_of = -1;
  bool strict_orthogonality = false;
  std::string witness_mode = "general";  // general | unentangled
  long long max_side = 6000;
  long long max_variables = 40000;
};

struct LowerSpec {
  std::string method = "seesaw";  // seesaw | prepare_measure
  int restarts = 50;
  bool real = false;
  std::vector<int> degenerate_parties;  // parties whose settings may be degenerate
  int max_degenerate = 0;               // total number of degenerate settings allowed
  std::string witness_mode = "general";
};

struct ScenarioConfig {
  std::string name;
  InequalitySpec inequality;
  std::vector<int> dims;  // 0 = unbounded ("inf")
  std::vector<UpperSpec> upper;  // the record holds the maximum over these
  std::optional<LowerSpec> lower;
  std::optional<UpperSpec> quantum;  // dimension-free bound used as a sanity limit
  sdp::Tolerances solver;
  std::uint64_t seed = kDefaultSeed;
  std::string output;  // directory for results (empty = none)
  json source;         // the parsed configuration, echoed in records

  bell::BellFunctional functional() const;
};

// Parses a configuration; diagnostics carry the line (syntax errors) or the
// field path (semantic errors).
ScenarioConfig parse_config(const std::string& text, const std::string& origin = "<config>");
ScenarioConfig load_config(const std::filesystem::path& path);
std::filesystem::path default_config_dir();
ScenarioConfig bundled_config(const std::string& name);

struct SubResult {
  std::string label;   // e.g. "profile A:(2,0)(1,1)..." or "fix A2->0"
  std::string schedule;
  double value = 0.0;
  double certified = 0.0;
  bool ok = false;
};

struct ResultRecord {
  std::string scenario;
  std::string bound_type;  // upper:heads_legs | upper:hybrid | upper:npa | upper:witness | lower:seesaw | lower:prepare_measure
  double value = 0.0;      // solver value (upper) or achieved value (lower)
  double certified = 0.0;  // certified dual bound (upper) or re-evaluated value (lower)
  double gap = 0.0;
  std::string profile;     // rank profile / label achieving the maximum
  std::string schedule;    // PPT schedule that was used
  std::string summary;     // relaxation size summary
  std::vector<SubResult> parts;
  double seconds = 0.0;
  int iterations = 0;
  std::string status = "ok";
  std::vector<std::string> caveats;
  json config;

  json to_json() const;
};

// Runs every bound the configuration asks for (upper relaxations, the
// dimension-free quantum bound and the see-saw lower bound).
std::vector<ResultRecord> run_scenario(const ScenarioConfig& config);
ResultRecord run_upper(const ScenarioConfig& config, const UpperSpec& spec, const std::string& kind = "upper");
ResultRecord run_lower(const ScenarioConfig& config);

// Persists records (JSON array + CSV) under `dir` with the given stem.
void write_records(const std::vector<ResultRecord>& records, const std::filesystem::path& dir,
                   const std::string& stem);
std::string records_csv(const std::vector<ResultRecord>& records);

// Minimal JSON-schema check (type, required, properties, items, enum,
// minimum) against the bundled results schema. Returns the list of problems.
std::vector<std::string> validate_schema(const json& instance, const json& schema);
json results_schema();

// Dimension certification from an observed value.
struct Verdict {
  bool certified = false;
  bool inconsistent = false;  // observed value exceeds the dimension-free bound
  double threshold = 0.0;
  double quantum_bound = 0.0;
  std::vector<int> parties;  // parties whose local dimension is certified > d
  int dimension = 0;         // the excluded dimension d
  std::string text;
};
Verdict certify_dimension(const bell::BellFunctional& f, double observed, const ResultRecord& upper,
                          const std::vector<int>& dims, const ResultRecord* quantum = nullptr);

// True when relabelling parties p and q leaves the functional unchanged.
bool swap_symmetric(const bell::BellFunctional& f, int p, int q);

// Exports the first relaxation of the configuration (first PPT schedule) in
// SDPA sparse format; returns the constant to add to the SDP objective.
double export_relaxation(const ScenarioConfig& config, const std::filesystem::path& out);

// ---- table reproductions ----

struct Cell {
  std::string row;
  std::string column;
  std::string config;      // bundled configuration name
  std::string bound_type;  // which record of the configuration
  double expected = 0.0;
  double tolerance = 0.0;
  bool optional = false;   // only evaluated with --heavy
  double value = 0.0;
  std::string status = "pending";  // pass | FAIL | skipped | unavailable (...)
  std::string note;
};

struct Table {
  std::string id;
  std::string title;
  std::vector<Cell> cells;
  std::vector<ResultRecord> records;
  std::vector<std::string> notes;
  bool passed() const;
  std::string render() const;
};

struct ReproduceOptions {
  bool heavy = false;
  int jobs = 1;
  std::optional<std::uint64_t> seed;
};

std::vector<std::string> table_ids();
Table reproduce(const std::string& id, const ReproduceOptions& opt = {});

// Runs configurations concurrently (up to `jobs` workers); records come back
// in configuration order.
std::vector<std::vector<ResultRecord>> run_many(const std::vector<ScenarioConfig>& configs, int jobs);

}  // namespace dimbound::scenarios
