#include <cstdio>
#include <iomanip>
#include <iostream>

#include "CLI11.hpp"
#include "dimbound/heads_legs.hpp"
#include "dimbound/scenarios.hpp"

using namespace dimbound;
using namespace dimbound::scenarios;

namespace {

void print_record(const ResultRecord& r) {
  std::cout << std::left << std::setw(22) << r.bound_type << std::setprecision(10) << std::setw(16) << r.certified;
  if (r.bound_type.rfind("upper", 0) == 0 || r.bound_type.rfind("quantum", 0) == 0)
    std::cout << " (primal " << r.value << ", gap " << std::setprecision(2) << r.gap << ")";
  if (!r.schedule.empty() && r.schedule != "none") std::cout << " ppt=" << r.schedule;
  if (!r.profile.empty() && r.profile != "nondegenerate") std::cout << " profile=" << r.profile;
  std::cout << std::setprecision(3) << " [" << r.seconds << " s]";
  if (r.status != "ok") std::cout << " STATUS: " << r.status;
  std::cout << "\n";
  for (const auto& c : r.caveats) std::cout << "    caveat: " << c << "\n";
}

void maybe_write(const ScenarioConfig& c, const std::vector<ResultRecord>& recs, const std::string& out) {
  const std::string dir = out.empty() ? c.output : out;
  if (dir.empty()) return;
  write_records(recs, dir, c.name);
  std::cout << "records written to " << dir << "/" << c.name << ".{json,csv}\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dimbound: dimension-bounded Bell and prepare-and-measure bounds"};
  app.require_subcommand(1);

  std::string config_path, out_path, table, output_dir;
  double observed = 0.0;
  bool heavy = false;
  int jobs = 1;
  std::uint64_t seed = 0;

  auto* run = app.add_subcommand("run", "run every bound requested by a configuration");
  run->add_option("config", config_path, "configuration file")->required();
  run->add_option("--output", output_dir, "directory for JSON/CSV records");

  auto* rep = app.add_subcommand("reproduce", "recompute a results table and compare with the published values");
  rep->add_option("table", table, "table1 | table2 | table3 | witness")
      ->required()
      ->check(CLI::IsMember(table_ids()));
  rep->add_flag("--heavy", heavy, "include cells that need large relaxations");
  rep->add_option("--jobs", jobs, "parallel workers")->check(CLI::PositiveNumber);
  auto* seed_opt = rep->add_option("--seed", seed, "see-saw seed");
  rep->add_option("--output", output_dir, "directory for JSON/CSV records");

  auto* exp = app.add_subcommand("export-sdpa", "write the first relaxation of a configuration in SDPA format");
  exp->add_option("config", config_path, "configuration file")->required();
  exp->add_option("out", out_path, "output .dat-s file")->required();

  auto* ss = app.add_subcommand("seesaw", "run only the see-saw lower bound of a configuration");
  ss->add_option("config", config_path, "configuration file")->required();
  ss->add_option("--output", output_dir, "directory for JSON/CSV records");

  auto* cert = app.add_subcommand("certify", "decide whether an observed value certifies a local dimension");
  cert->add_option("config", config_path, "configuration file")->required();
  cert->add_option("--observed", observed, "observed Bell value")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      auto c = load_config(config_path);
      std::cout << "scenario " << c.name << "\n";
      auto recs = run_scenario(c);
      for (const auto& r : recs) print_record(r);
      maybe_write(c, recs, output_dir);
      return 0;
    }
    if (*ss) {
      auto c = load_config(config_path);
      if (!c.lower) throw ConfigError(config_path + ": field 'lower': missing (nothing for the see-saw to do)");
      auto r = run_lower(c);
      print_record(r);
      maybe_write(c, {r}, output_dir);
      return 0;
    }
    if (*exp) {
      auto c = load_config(config_path);
      const double offset = export_relaxation(c, out_path);
      std::cout << "wrote " << out_path << "\n";
      std::cout << std::setprecision(17) << "objective constant " << offset
                << "\n"
                << "bound = objective constant - optimum of max <F0, X> s.t. <F_i, X> = c_i\n";
      return 0;
    }
    if (*cert) {
      auto c = load_config(config_path);
      if (c.upper.empty()) throw ConfigError(config_path + ": field 'upper': missing (certification needs a threshold)");
      auto recs = run_scenario(c);
      const ResultRecord* upper = nullptr;
      const ResultRecord* quantum = nullptr;
      for (const auto& r : recs) {
        if (r.bound_type.rfind("upper", 0) == 0) upper = &r;
        if (r.bound_type.rfind("quantum", 0) == 0) quantum = &r;
      }
      for (const auto& r : recs) print_record(r);
      auto v = certify_dimension(c.functional(), observed, *upper, c.dims, quantum);
      std::cout << (v.inconsistent ? "INCONSISTENT: " : v.certified ? "CERTIFIED: " : "NOT CERTIFIED: ") << v.text
                << "\n";
      return 0;
    }
    if (*rep) {
      ReproduceOptions opt;
      opt.heavy = heavy;
      opt.jobs = jobs;
      if (*seed_opt) opt.seed = seed;
      Table t = reproduce(table, opt);
      std::cout << t.render();
      if (!output_dir.empty()) write_records(t.records, output_dir, t.id);
      return t.passed() ? 0 : 1;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const relax::RelaxError& e) {
    std::cerr << "relaxation error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
