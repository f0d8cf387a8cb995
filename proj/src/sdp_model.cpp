#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

#include <unistd.h>

#include "dimbound/sdp.hpp"

namespace dimbound::sdp {

bool SdpProblem::is_real() const {
  return std::all_of(blocks.begin(), blocks.end(),
                     [](const Block& b) { return b.field == Field::Real; });
}

void SdpProblem::check() const {
  auto check_entry = [&](const Entry& e) {
    if (e.block < 0 || e.block >= static_cast<int>(blocks.size()))
      throw std::invalid_argument("entry references a missing block");
    const Block& b = blocks[e.block];
    if (e.row < 0 || e.col < 0 || e.row >= b.size || e.col >= b.size)
      throw std::invalid_argument("entry index outside its block");
    if (e.row > e.col) throw std::invalid_argument("entries must satisfy row <= col");
    if (!std::isfinite(e.value) || !std::isfinite(e.imag))
      throw std::invalid_argument("non-finite coefficient");
    if (e.imag != 0.0 && (b.field == Field::Real || e.row == e.col))
      throw std::invalid_argument("imaginary part on a real block or a diagonal");
  };
  for (const auto& b : blocks)
    if (b.size < 1) throw std::invalid_argument("block side must be positive");
  for (const auto& e : objective) check_entry(e);
  for (const auto& c : constraints) {
    if (!std::isfinite(c.rhs)) throw std::invalid_argument("non-finite right-hand side");
    for (const auto& e : c.coeffs) check_entry(e);
  }
}

SdpProblem embed_complex(const SdpProblem& p) {
  SdpProblem out;
  for (const auto& b : p.blocks)
    out.blocks.push_back({b.field == Field::Complex ? 2 * b.size : b.size, Field::Real});
  auto map_entries = [&](const std::vector<Entry>& in) {
    std::vector<Entry> res;
    for (const auto& e : in) {
      const Block& b = p.blocks[e.block];
      if (b.field == Field::Real) {
        res.push_back(e);
        continue;
      }
      const int n = b.size;
      // [[Re H, -Im H], [Im H, Re H]] scaled by 1/2
      if (e.value != 0.0) {
        res.push_back({e.block, e.row, e.col, 0.5 * e.value, 0.0});
        res.push_back({e.block, n + e.row, n + e.col, 0.5 * e.value, 0.0});
      }
      if (e.imag != 0.0) {
        res.push_back({e.block, e.col, n + e.row, 0.5 * e.imag, 0.0});
        res.push_back({e.block, e.row, n + e.col, -0.5 * e.imag, 0.0});
      }
    }
    return res;
  };
  out.objective = map_entries(p.objective);
  for (const auto& c : p.constraints) out.constraints.push_back({map_entries(c.coeffs), c.rhs});
  return out;
}

namespace {

// Canonical sorted/merged copy of a coefficient list.
std::vector<Entry> canonical(std::vector<Entry> v) {
  std::sort(v.begin(), v.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.block, a.row, a.col) < std::tie(b.block, b.row, b.col);
  });
  std::vector<Entry> out;
  for (const auto& e : v) {
    if (!out.empty() && out.back().block == e.block && out.back().row == e.row &&
        out.back().col == e.col) {
      out.back().value += e.value;
      out.back().imag += e.imag;
    } else {
      out.push_back(e);
    }
  }
  std::erase_if(out, [](const Entry& e) { return e.value == 0.0 && e.imag == 0.0; });
  return out;
}

std::size_t hash_row(const std::vector<Entry>& v) {
  std::size_t h = v.size();
  auto mix = [&](std::size_t x) { h ^= x + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2); };
  for (const auto& e : v) {
    mix(std::hash<int>{}(e.block));
    mix(std::hash<int>{}(e.row));
    mix(std::hash<int>{}(e.col));
    mix(std::hash<double>{}(e.value));
    mix(std::hash<double>{}(e.imag));
  }
  return h;
}

bool same_row(const std::vector<Entry>& a, const std::vector<Entry>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].block != b[i].block || a[i].row != b[i].row || a[i].col != b[i].col ||
        a[i].value != b[i].value || a[i].imag != b[i].imag)
      return false;
  return true;
}

}  // namespace

std::vector<int> kept_constraint_rows(const SdpProblem& p) {
  std::vector<std::vector<Entry>> rows;
  rows.reserve(p.constraints.size());
  for (const auto& c : p.constraints) rows.push_back(canonical(c.coeffs));
  std::unordered_multimap<std::size_t, int> seen;
  std::vector<int> kept;
  for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
    if (rows[i].empty()) {
      if (p.constraints[i].rhs != 0.0)
        throw std::invalid_argument("constraint 0 = " + std::to_string(p.constraints[i].rhs));
      continue;
    }
    std::size_t h = hash_row(rows[i]);
    bool dup = false;
    auto range = seen.equal_range(h);
    for (auto it = range.first; it != range.second && !dup; ++it) {
      if (!same_row(rows[it->second], rows[i])) continue;
      if (p.constraints[it->second].rhs != p.constraints[i].rhs)
        throw std::invalid_argument("identical constraint rows with different right-hand sides");
      dup = true;
    }
    if (!dup) {
      seen.emplace(h, i);
      kept.push_back(i);
    }
  }
  return kept;
}

SdpProblem drop_duplicate_constraints(const SdpProblem& p) {
  SdpProblem out;
  out.blocks = p.blocks;
  out.objective = p.objective;
  for (int i : kept_constraint_rows(p)) out.constraints.push_back(p.constraints[i]);
  return out;
}

// ---- SDPA sparse format ----

namespace {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void export_sdpa(const SdpProblem& problem, const std::filesystem::path& path) {
  if (!problem.is_real())
    throw std::invalid_argument("export_sdpa needs a real problem; call embed_complex first");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << problem.constraints.size() << "\n" << problem.blocks.size() << "\n";
  for (std::size_t k = 0; k < problem.blocks.size(); ++k)
    out << (k ? " " : "") << problem.blocks[k].size;
  out << "\n";
  for (std::size_t i = 0; i < problem.constraints.size(); ++i)
    out << (i ? " " : "") << fmt17(problem.constraints[i].rhs);
  out << "\n";
  auto write = [&](std::size_t matno, const std::vector<Entry>& coeffs) {
    for (const auto& e : canonical(coeffs))
      out << matno << " " << e.block + 1 << " " << e.row + 1 << " " << e.col + 1 << " "
          << fmt17(e.value) << "\n";
  };
  write(0, problem.objective);
  for (std::size_t i = 0; i < problem.constraints.size(); ++i)
    write(i + 1, problem.constraints[i].coeffs);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

SdpProblem import_sdpa(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream clean;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header && (line.empty() || line[0] == '"' || line[0] == '*')) continue;
    header = false;
    for (char& ch : line)
      if (ch == '{' || ch == '}' || ch == '(' || ch == ')' || ch == ',') ch = ' ';
    clean << line << "\n";
  }
  auto need = [&](auto& v) {
    if (!(clean >> v)) throw std::runtime_error("truncated SDPA file " + path.string());
  };
  long m = 0, nb = 0;
  need(m);
  need(nb);
  SdpProblem p;
  for (long k = 0; k < nb; ++k) {
    long s;
    need(s);
    if (s < 0) throw std::runtime_error("diagonal blocks are not supported");
    p.blocks.push_back({static_cast<int>(s), Field::Real});
  }
  p.constraints.resize(m);
  for (long i = 0; i < m; ++i) {
    std::string tok;
    need(tok);
    p.constraints[i].rhs = std::strtod(tok.c_str(), nullptr);
  }
  long matno, blk, r, c;
  std::string val;
  while (clean >> matno >> blk >> r >> c >> val) {
    if (matno < 0 || matno > m || blk < 1 || blk > nb)
      throw std::runtime_error("bad SDPA entry line");
    Entry e{static_cast<int>(blk - 1), static_cast<int>(std::min(r, c) - 1),
            static_cast<int>(std::max(r, c) - 1), std::strtod(val.c_str(), nullptr), 0.0};
    if (matno == 0) p.objective.push_back(e);
    else p.constraints[matno - 1].coeffs.push_back(e);
  }
  p.check();
  return p;
}

// ---- validation ----

double inner(const std::vector<Entry>& coeffs, const std::vector<RealMatrix>& X) {
  double s = 0.0;
  for (const auto& e : coeffs) {
    const RealMatrix& x = X[e.block];
    s += e.value * (e.row == e.col ? x(e.row, e.row) : x(e.row, e.col) + x(e.col, e.row));
  }
  return s;
}

RealMatrix dense_block(const std::vector<Entry>& coeffs, int block, int size) {
  RealMatrix a = RealMatrix::Zero(size, size);
  for (const auto& e : coeffs) {
    if (e.block != block) continue;
    a(e.row, e.col) += e.value;
    if (e.row != e.col) a(e.col, e.row) += e.value;
  }
  return a;
}

ValidationReport validate_solution(const SdpProblem& problem, const SdpSolution& sol,
                                   double feasibility_tol) {
  const SdpProblem real = problem.is_real() ? problem : embed_complex(problem);
  ValidationReport rep;
  if (sol.X.size() != real.blocks.size())
    throw std::invalid_argument("solution does not match the problem blocks");
  double dobj = 0.0;
  for (std::size_t i = 0; i < real.constraints.size(); ++i) {
    const auto& c = real.constraints[i];
    rep.primal_residual = std::max(rep.primal_residual, std::abs(inner(c.coeffs, sol.X) - c.rhs));
    if (static_cast<Eigen::Index>(i) < sol.y.size()) dobj += c.rhs * sol.y(i);
  }
  rep.gap = dobj - inner(real.objective, sol.X);
  if (sol.Z.size() == real.blocks.size() && sol.y.size() == static_cast<Eigen::Index>(real.constraints.size())) {
    std::vector<RealMatrix> S;
    for (std::size_t k = 0; k < real.blocks.size(); ++k)
      S.push_back(-dense_block(real.objective, static_cast<int>(k), real.blocks[k].size) - sol.Z[k]);
    for (std::size_t i = 0; i < real.constraints.size(); ++i)
      for (const auto& e : real.constraints[i].coeffs) {
        S[e.block](e.row, e.col) += sol.y(i) * e.value;
        if (e.row != e.col) S[e.block](e.col, e.row) += sol.y(i) * e.value;
      }
    for (const auto& s : S)
      if (s.size() > 0) rep.dual_residual = std::max(rep.dual_residual, s.cwiseAbs().maxCoeff());
  }
  for (std::size_t k = 0; k < sol.X.size(); ++k) {
    const RealMatrix& x = sol.X[k];
    double lmin = 0.0;
    if (x.rows() > 0) {
      Eigen::SelfAdjointEigenSolver<RealMatrix> es(0.5 * (x + x.transpose()), Eigen::EigenvaluesOnly);
      lmin = es.eigenvalues()(0);
    }
    rep.min_eigenvalues.push_back(lmin);
    if (lmin < -feasibility_tol) rep.flagged_blocks.push_back(static_cast<int>(k));
  }
  return rep;
}

// ---- external solver ----

std::optional<SdpSolution> solve_external(const SdpProblem& problem) {
  const char* exe = std::getenv("DIMBOUND_SDP_SOLVER");
  if (!exe || !*exe) return std::nullopt;
  static std::atomic<int> counter{0};
  auto dir = std::filesystem::temp_directory_path();
  std::string stem = "dimbound_" + std::to_string(::getpid()) + "_" + std::to_string(counter++);
  auto in = dir / (stem + ".dat-s"), out = dir / (stem + ".sol"), log = dir / (stem + ".log");
  export_sdpa(problem.is_real() ? problem : embed_complex(problem), in);
  std::string cmd = std::string("\"") + exe + "\" \"" + in.string() + "\" \"" + out.string() +
                    "\" > \"" + log.string() + "\" 2>&1";
  int rc = std::system(cmd.c_str());
  SdpSolution sol;
  sol.diagnostics = "external solver exit code " + std::to_string(rc);
  std::ifstream lf(log);
  std::string line;
  bool have_p = false, have_d = false;
  while (std::getline(lf, line)) {
    auto grab = [&](const std::string& key, double& v, bool& flag) {
      auto pos = line.find(key);
      if (pos != std::string::npos) {
        v = std::strtod(line.c_str() + pos + key.size(), nullptr);
        flag = true;
      }
    };
    grab("Primal objective value:", sol.primal_objective, have_p);
    grab("Dual objective value:", sol.dual_objective, have_d);
  }
  std::error_code ec;
  std::filesystem::remove(in, ec);
  std::filesystem::remove(out, ec);
  std::filesystem::remove(log, ec);
  if (have_p && have_d) {
    sol.gap = sol.dual_objective - sol.primal_objective;
    sol.relative_gap = std::abs(sol.gap) /
                       (1.0 + std::abs(sol.primal_objective) + std::abs(sol.dual_objective));
    sol.status = sol.relative_gap < 1e-6 ? Status::Optimal : Status::NearOptimal;
  }
  return sol;
}

}  // namespace dimbound::sdp
