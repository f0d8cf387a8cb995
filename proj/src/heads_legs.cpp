#include "dimbound/heads_legs.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "dimbound/moment_relax.hpp"
#include "dimbound/seesaw.hpp"
#include "relax_internal.hpp"

namespace dimbound::relax {

namespace {

std::vector<int> default_ranks(int k, int d) {
  // same convention as the see-saw: even split, larger ranks last
  std::vector<int> v(k, d / k);
  for (int a = 0; a < d % k; ++a) ++v[k - 1 - a];
  return v;
}

// V(first copy of leg A, first copy of leg B) on Sym^NA (x) Sym^NB.
RealMatrix compressed_leg_swap(int d, int na, int nb) {
  std::vector<int> dims(na + nb, d);
  RealMatrix v = qlinalg::swap_matrix(dims, 0, na);
  RealMatrix p = qlinalg::kron_real(qlinalg::sym_isometry(d, na), qlinalg::sym_isometry(d, nb));
  return p.transpose() * v * p;
}

// V(head, first copy of the leg) on C^d (x) Sym^N.
RealMatrix compressed_head_swap(int d, int n) {
  std::vector<int> dims(n + 1, d);
  RealMatrix v = qlinalg::swap_matrix(dims, 0, 1);
  RealMatrix p = qlinalg::kron_real(RealMatrix::Identity(d, d), qlinalg::sym_isometry(d, n));
  return p.transpose() * v * p;
}

}  // namespace

PartyLayout build_party_layout(const PartyDiagram& pd, const bell::Scenario& s) {
  if (pd.party < 0 || pd.party >= s.parties()) throw RelaxError("trusted party out of range");
  const int d = pd.head_dim;
  if (d < 1) throw RelaxError("head dimension must be positive");
  const int m = s.settings(pd.party);
  if (!pd.leg_length.empty() && static_cast<int>(pd.leg_length.size()) != m)
    throw RelaxError("leg lengths must be given per setting");
  if (!pd.ranks.empty() && static_cast<int>(pd.ranks.size()) != m)
    throw RelaxError("rank profile must be given per setting");

  PartyLayout L;
  L.party = pd.party;
  L.head_dim = d;
  for (int x = 0; x < m; ++x) {
    const int k = s.outcome_count(pd.party, x);
    std::vector<int> r = pd.ranks.empty() ? default_ranks(k, d) : pd.ranks[x];
    if (static_cast<int>(r.size()) != k) throw RelaxError("rank profile outcome count");
    int sum = 0;
    for (int v : r) {
      if (v < 0) throw RelaxError("negative rank");
      sum += v;
    }
    if (sum != d) throw RelaxError("ranks must sum to the head dimension");
    L.ranks.push_back(r);
  }
  auto nonzero = [](const std::vector<int>& r) {
    return static_cast<int>(std::count_if(r.begin(), r.end(), [](int v) { return v > 0; }));
  };
  if (pd.fix_last)
    for (int x = m - 1; x >= 0; --x)
      if (nonzero(L.ranks[x]) >= 2) {
        L.fixed_setting = x;
        break;
      }

  // legs: every rank-1 piece of every outcome except the complement one
  std::vector<int> complement(m, -1);
  for (int x = 0; x < m; ++x) {
    if (x == L.fixed_setting || nonzero(L.ranks[x]) < 2) continue;
    const auto& r = L.ranks[x];
    int c = 0;
    for (int a = 0; a < static_cast<int>(r.size()); ++a)
      if (r[a] >= r[c]) c = a;
    complement[x] = c;
    int comp = 0;
    const int len = pd.leg_length.empty() ? 1 : pd.leg_length[x];
    if (len < 1) throw RelaxError("leg length must be at least 1");
    for (int a = 0; a < static_cast<int>(r.size()); ++a) {
      if (a == c) continue;
      for (int i = 0; i < r[a]; ++i) L.legs.push_back({x, a, comp++, len});
    }
  }

  L.factor_dims.push_back(d);
  for (const auto& leg : L.legs) L.factor_dims.push_back(static_cast<int>(qlinalg::binomial(leg.length + d - 1, d - 1)));
  L.dim = static_cast<int>(detail::product(L.factor_dims));

  const RealMatrix I = RealMatrix::Identity(L.dim, L.dim);
  L.ops.resize(m);
  for (int x = 0; x < m; ++x) {
    const auto& r = L.ranks[x];
    const int k = static_cast<int>(r.size());
    auto& ops = L.ops[x];
    ops.assign(k, RealMatrix::Zero(L.dim, L.dim));
    if (x == L.fixed_setting) {
      int off = 0;
      for (int a = 0; a < k; ++a) {
        RealMatrix h = RealMatrix::Zero(d, d);
        for (int i = off; i < off + r[a]; ++i) h(i, i) = 1.0;
        off += r[a];
        ops[a] = detail::embed(h, L.factor_dims, {0});
      }
    } else if (nonzero(r) < 2) {
      for (int a = 0; a < k; ++a)
        if (r[a] == d) ops[a] = I;
    } else {
      RealMatrix rest = I;
      for (int l = 0; l < static_cast<int>(L.legs.size()); ++l) {
        const auto& leg = L.legs[l];
        if (leg.setting != x) continue;
        RealMatrix v = detail::embed(compressed_head_swap(d, leg.length), L.factor_dims, {0, l + 1});
        ops[leg.outcome] += v;
        rest -= v;
      }
      ops[complement[x]] = rest;
    }
  }

  for (int i = 0; i < static_cast<int>(L.legs.size()); ++i)
    for (int j = i + 1; j < static_cast<int>(L.legs.size()); ++j) {
      if (L.legs[i].setting != L.legs[j].setting) continue;
      L.orthogonal.emplace_back(i, j);
      L.orthogonal_ops.push_back(detail::embed(compressed_leg_swap(d, L.legs[i].length, L.legs[j].length),
                                               L.factor_dims, {i + 1, j + 1}));
    }

  // sign-flip charges: generator i flips the sign of basis vector i in the
  // head and in every copy of every leg
  std::vector<std::vector<std::vector<int>>> occ;
  for (const auto& leg : L.legs) occ.push_back(qlinalg::occupation_basis(d, leg.length));
  std::vector<int> dg;
  for (int K = 0; K < L.dim; ++K) {
    detail::digits(K, L.factor_dims, dg);
    unsigned key = 0;
    for (int i = 1; i < d; ++i) {
      int n = dg[0] == i ? 1 : 0;
      for (std::size_t l = 0; l < L.legs.size(); ++l) n += occ[l][dg[l + 1]][i];
      if (n % 2) key |= 1u << (i - 1);
    }
    L.charge.push_back(key);
  }
  return L;
}

void DiagramSpec::check(const bell::Scenario& s) const {
  std::set<int> seen;
  std::vector<PartyLayout> layouts;
  for (const auto& pd : trusted) {
    if (!seen.insert(pd.party).second) throw RelaxError("party listed twice in the diagram");
    layouts.push_back(build_party_layout(pd, s));
  }
  for (const auto& g : ppt_groups) {
    if (g.empty()) throw RelaxError("empty PPT group");
    std::set<Circle> uniq(g.begin(), g.end());
    if (uniq.size() != g.size()) throw RelaxError("repeated circle in a PPT group");
    for (const auto& c : g) {
      auto it = std::find_if(layouts.begin(), layouts.end(), [&](const PartyLayout& l) { return l.party == c.party; });
      if (it == layouts.end()) throw RelaxError("PPT group references an untrusted party");
      if (c.setting < 0) continue;
      bool found = false;
      for (const auto& leg : it->legs)
        if (leg.setting == c.setting && leg.component == c.component && c.copy >= 0 && c.copy < leg.length)
          found = true;
      if (!found) throw RelaxError("PPT group references a circle that does not exist");
    }
  }
}

std::string DiagramSpec::describe() const {
  std::ostringstream os;
  for (const auto& pd : trusted) {
    os << char('A' + pd.party) << ": head " << pd.head_dim << ", legs ";
    if (pd.leg_length.empty()) os << "1";
    else
      for (std::size_t x = 0; x < pd.leg_length.size(); ++x) os << (x ? "/" : "") << pd.leg_length[x];
    if (!pd.ranks.empty()) {
      os << ", ranks";
      for (const auto& r : pd.ranks) {
        os << " (";
        for (std::size_t a = 0; a < r.size(); ++a) os << (a ? "," : "") << r[a];
        os << ")";
      }
    }
    os << (pd.fix_last ? ", last fixed" : "") << "; ";
  }
  os << ppt_groups.size() << " PPT groups";
  if (strict_orthogonality) os << ", strict orthogonality";
  return os.str();
}

qlinalg::HermitianOperator pseudo_measurement(const qlinalg::SubsystemShape& shape, int head, int circle,
                                              int outcome) {
  if (head < 0 || circle < 0 || head >= static_cast<int>(shape.size()) || circle >= static_cast<int>(shape.size()) ||
      head == circle)
    throw RelaxError("pseudo-measurement factor index");
  if (shape.dim(head) != shape.dim(circle)) throw RelaxError("head and circle dimensions differ");
  if (outcome != 0 && outcome != 1) throw RelaxError("pseudo-measurements are dichotomic");
  RealMatrix v = qlinalg::swap_matrix(shape.dims(), head, circle);
  if (outcome == 1) v = RealMatrix::Identity(v.rows(), v.cols()) - v;
  return qlinalg::HermitianOperator::from_real(shape, v);
}

CompiledRelaxation compile(const DiagramSpec& diagram, const bell::BellFunctional& f) {
  if (diagram.trusted.empty()) throw RelaxError("empty diagram");
  if (static_cast<int>(diagram.trusted.size()) != f.scenario.parties())
    throw RelaxError("every party needs a head in an all-trusted diagram");
  auto c = compile_hybrid(diagram, f, 1);
  c.kind = "heads_legs";
  return c;
}

CompiledRelaxation rank_structured_compile(DiagramSpec diagram, const bell::BellFunctional& f,
                                           const std::vector<std::vector<std::vector<int>>>& profile) {
  for (auto& pd : diagram.trusted) {
    if (pd.party >= static_cast<int>(profile.size()) || profile[pd.party].empty())
      throw RelaxError("rank profile missing for a trusted party");
    pd.ranks = profile[pd.party];
  }
  return diagram.trusted.size() == static_cast<std::size_t>(f.scenario.parties()) ? compile(diagram, f)
                                                                                   : compile_hybrid(diagram, f, 1);
}

std::vector<std::vector<Circle>> ppt_schedule(const std::vector<PartyLayout>& parties, const std::string& kind) {
  // every leg as a whole (all its copies), and its single circles
  std::vector<std::vector<Circle>> legs;
  std::vector<std::vector<Circle>> singles;
  std::vector<std::vector<Circle>> per_party;
  for (const auto& p : parties) {
    std::vector<Circle> all;
    for (const auto& leg : p.legs) {
      std::vector<Circle> whole;
      for (int c = 0; c < leg.length; ++c) {
        Circle cc{p.party, leg.setting, leg.component, c};
        whole.push_back(cc);
        all.push_back(cc);
        if (leg.length > 1) singles.push_back({cc});
      }
      legs.push_back(whole);
    }
    if (!all.empty()) per_party.push_back(all);
  }
  std::vector<std::vector<Circle>> out;
  auto push = [&](std::vector<Circle> g) {
    std::sort(g.begin(), g.end());
    if (std::find(out.begin(), out.end(), g) == out.end()) out.push_back(g);
  };
  if (kind == "none") return out;
  if (kind == "basic" || kind == "pairs") {
    for (const auto& g : legs) push(g);
    for (const auto& g : singles) push(g);
    for (const auto& g : per_party) push(g);
    if (kind == "pairs")
      for (std::size_t i = 0; i < legs.size(); ++i)
        for (std::size_t j = i + 1; j < legs.size(); ++j) {
          auto g = legs[i];
          g.insert(g.end(), legs[j].begin(), legs[j].end());
          push(g);
        }
    return out;
  }
  if (kind == "legs") {
    const int n = static_cast<int>(legs.size());
    if (n > 16) throw RelaxError("too many legs for the full subset schedule");
    for (int mask = 1; mask < (1 << n); ++mask) {
      std::vector<Circle> g;
      for (int i = 0; i < n; ++i)
        if (mask >> i & 1) g.insert(g.end(), legs[i].begin(), legs[i].end());
      push(g);
    }
    for (const auto& g : singles) push(g);
    return out;
  }
  throw RelaxError("unknown PPT schedule '" + kind + "'");
}

std::vector<std::vector<Circle>> ppt_schedule(const DiagramSpec& diagram, const bell::Scenario& s,
                                              const std::string& kind) {
  std::vector<PartyLayout> layouts;
  for (const auto& pd : diagram.trusted) layouts.push_back(build_party_layout(pd, s));
  return ppt_schedule(layouts, kind);
}

Matrix apply_extension_map(const Matrix& op, int prefix_dim, int d, int copies) {
  const long long sdim = qlinalg::binomial(copies + d - 1, d - 1);
  if (copies < 1 || op.rows() != prefix_dim * sdim || op.cols() != op.rows())
    throw RelaxError("extension map input has the wrong size");
  // Stays in the occupation basis: |n> = sum_i sqrt(n_i/N) |i> (x) |n - e_i>,
  // so the first-copy reduction never touches (C^d)^N.
  const auto basis = qlinalg::occupation_basis(d, copies);
  const auto lower = qlinalg::occupation_basis(d, copies - 1);
  std::map<std::vector<int>, int> index_of;
  for (std::size_t m = 0; m < lower.size(); ++m) index_of[lower[m]] = static_cast<int>(m);
  // lowered[i][n] = (index of n - e_i, sqrt(n_i / N)), or -1
  std::vector<std::vector<std::pair<int, double>>> lowered(d, std::vector<std::pair<int, double>>(basis.size(), {-1, 0.0}));
  for (std::size_t n = 0; n < basis.size(); ++n)
    for (int i = 0; i < d; ++i) {
      if (basis[n][i] == 0) continue;
      auto t = basis[n];
      --t[i];
      lowered[i][n] = {index_of.at(t), std::sqrt(static_cast<double>(basis[n][i]) / copies)};
    }
  const Eigen::Index S = static_cast<Eigen::Index>(sdim);
  Matrix reduced = Matrix::Zero(prefix_dim * d, prefix_dim * d);
  Matrix rest = Matrix::Zero(prefix_dim, prefix_dim);
  for (int p = 0; p < prefix_dim; ++p)
    for (int q = 0; q < prefix_dim; ++q) {
      auto block = op.block(p * S, q * S, S, S);
      rest(p, q) = block.trace();
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          qlinalg::Complex acc = 0.0;
          for (Eigen::Index n = 0; n < S; ++n) {
            const auto [mi, ci] = lowered[i][n];
            if (mi < 0) continue;
            for (Eigen::Index n2 = 0; n2 < S; ++n2) {
              const auto [mj, cj] = lowered[j][n2];
              if (mj == mi) acc += ci * cj * block(n, n2);
            }
          }
          reduced(p * d + i, q * d + j) = acc;
        }
    }
  const double n = copies;
  // N/(N+d) tr_{N-1} + d/(N+d) tr(.) I/d  (trace preserving)
  return n / (n + d) * reduced +
         1.0 / (n + d) * qlinalg::kron_matrices(std::vector<Matrix>{rest, Matrix::Identity(d, d)});
}

RealMatrix apply_extension_map(const RealMatrix& op, int prefix_dim, int d, int copies) {
  return apply_extension_map(Matrix(op.cast<qlinalg::Complex>()), prefix_dim, d, copies).real();
}

}  // namespace dimbound::relax

// ---- rounding ----

namespace dimbound::relax {

RoundingResult round_to_strategy(const CompiledRelaxation& c, const RealVector& variables,
                                 const bell::BellFunctional& f, std::uint64_t seed) {
  if (!c.untrusted.empty() || c.trusted.empty()) throw RelaxError("rounding needs an all-trusted relaxation");
  RealMatrix W = c.moment(variables, Word{});
  std::vector<int> fdims;
  for (const auto& L : c.trusted) fdims.insert(fdims.end(), L.factor_dims.begin(), L.factor_dims.end());
  Matrix Wc = W.cast<qlinalg::Complex>();

  bell::Strategy st;
  const int P = f.scenario.parties();
  st.dims.assign(P, 0);
  st.measurements.resize(P);
  seesaw::RankProfile profile;
  profile.ranks.resize(P);
  int offset = 0;
  for (const auto& L : c.trusted) {
    const int d = L.head_dim;
    std::vector<qlinalg::Vector> phi;
    for (std::size_t l = 0; l < L.legs.size(); ++l) {
      std::vector<int> keep{offset + 1 + static_cast<int>(l)};
      Matrix red = qlinalg::partial_trace(Wc, fdims, keep);
      if (L.legs[l].length > 1) red = apply_extension_map(red, 1, d, L.legs[l].length);
      qlinalg::Vector v = qlinalg::herm_eig(0.5 * (red + red.adjoint())).vectors.col(0);
      // re-orthonormalize against earlier legs of the same setting
      for (std::size_t k = 0; k < l; ++k)
        if (L.legs[k].setting == L.legs[l].setting) v -= phi[k].dot(v) * phi[k];
      if (v.norm() < 1e-9) v = qlinalg::Vector::Unit(d, static_cast<Eigen::Index>(l % d));
      phi.push_back(v.normalized());
    }
    offset += static_cast<int>(L.factor_dims.size());
    st.dims[L.party] = d;
    profile.ranks[L.party] = L.ranks;
    for (int x = 0; x < static_cast<int>(L.ranks.size()); ++x) {
      const auto& r = L.ranks[x];
      std::vector<Matrix> ops(r.size(), Matrix::Zero(d, d));
      if (x == L.fixed_setting) {
        int off = 0;
        for (std::size_t a = 0; a < r.size(); ++a) {
          for (int i = 0; i < r[a]; ++i) ops[a](off + i, off + i) = 1.0;
          off += r[a];
        }
      } else {
        Matrix rest = Matrix::Identity(d, d);
        int comp = -1;
        for (std::size_t a = 0; a < r.size(); ++a)
          if (r[a] == d) comp = static_cast<int>(a);
        for (std::size_t l = 0; l < L.legs.size(); ++l) {
          if (L.legs[l].setting != x) continue;
          Matrix pr = phi[l] * phi[l].adjoint();
          ops[L.legs[l].outcome] += pr;
          rest -= pr;
        }
        if (comp < 0) {
          // the outcome without legs takes the complement
          for (std::size_t a = 0; a < r.size(); ++a) {
            bool has = std::any_of(L.legs.begin(), L.legs.end(),
                                   [&](const Leg& g) { return g.setting == x && g.outcome == static_cast<int>(a); });
            if (!has && r[a] > 0) comp = static_cast<int>(a);
          }
        }
        if (comp >= 0) ops[comp] = rest;
      }
      st.measurements[L.party].push_back(ops);
    }
  }
  st.state = Matrix::Identity(1, 1);
  auto [psi, val] = seesaw::optimal_state(f, st);
  st.state = psi * psi.adjoint();

  RoundingResult out;
  out.value = bell::evaluate(f, bell::strategy_to_table(st));
  out.strategy = st;
  seesaw::Options o;
  o.seed = seed;
  auto polish = [&](bell::Strategy cand) {
    seesaw::iterate(f, cand, profile, o);
    const double v = bell::evaluate(f, bell::strategy_to_table(cand));
    if (v > out.value + 1e-12) {
      out.value = v;
      out.strategy = cand;
      out.refined = true;
    }
  };
  polish(st);

  // The relaxation optimum is an average over sign flips, so the extracted
  // legs can sit at a symmetric fixed point of the see-saw; restart from
  // small rotations of the extracted measurements.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  for (int attempt = 0; attempt < 24; ++attempt) {
    bell::Strategy cand = st;
    for (auto& party : cand.measurements)
      for (auto& setting : party) {
        const int d = static_cast<int>(setting.front().rows());
        RealMatrix A = RealMatrix::Zero(d, d);
        for (int i = 0; i < d; ++i)
          for (int j = i + 1; j < d; ++j) {
            A(i, j) = 0.3 * gauss(rng);
            A(j, i) = -A(i, j);
          }
        const RealMatrix I = RealMatrix::Identity(d, d);
        const Matrix U = ((I - A).inverse() * (I + A)).cast<qlinalg::Complex>();
        for (auto& op : setting) op = U * op * U.adjoint();
      }
    auto [psi, val] = seesaw::optimal_state(f, cand);
    cand.state = psi * psi.adjoint();
    polish(cand);
  }
  return out;
}

// ---- prepare-and-measure witness ----

namespace {

// Symmetric matrix variable over qubit factors; entries between different
// charge sectors are left out.
struct MatrixVar {
  int dim = 0;
  std::vector<int> id;
  int at(int i, int j) const { return id[static_cast<std::size_t>(i) * dim + j]; }
};

MatrixVar add_matrix_var(sdp::LmiBuilder& b, const std::vector<unsigned>& key, double bound) {
  MatrixVar m;
  m.dim = static_cast<int>(key.size());
  m.id.assign(static_cast<std::size_t>(m.dim) * m.dim, -1);
  for (int i = 0; i < m.dim; ++i)
    for (int j = i; j < m.dim; ++j)
      if (key[i] == key[j]) m.id[static_cast<std::size_t>(i) * m.dim + j] = m.id[static_cast<std::size_t>(j) * m.dim + i] =
                                b.add_variable(bound);
  return m;
}

// PSD block of the matrix after transposing the qubit factors in `mask`
// (factor 0 is the most significant bit).
void add_transposed_block(sdp::LmiBuilder& b, const MatrixVar& m, int factors, unsigned mask, double trace_bound,
                          const std::string& label) {
  const int blk = b.add_block(m.dim, trace_bound, label);
  unsigned bits = 0;
  for (int f = 0; f < factors; ++f)
    if (mask >> f & 1) bits |= 1u << (factors - 1 - f);
  for (int i = 0; i < m.dim; ++i)
    for (int j = i; j < m.dim; ++j) {
      const unsigned di = static_cast<unsigned>(i), dj = static_cast<unsigned>(j);
      const unsigned ti = (di & ~bits) | (dj & bits), tj = (dj & ~bits) | (di & bits);
      const int var = m.at(static_cast<int>(ti), static_cast<int>(tj));
      if (var >= 0) b.add(blk, i, j, var, 1.0);
    }
}

void add_trace_objective(sdp::LmiBuilder& b, const MatrixVar& m, const RealMatrix& O, double scale) {
  for (int i = 0; i < m.dim; ++i)
    for (int j = 0; j < m.dim; ++j)
      if (O(j, i) != 0.0 && m.at(i, j) >= 0) b.add_objective(m.at(i, j), scale * O(j, i));
}

std::vector<unsigned> qubit_masks(int legs, const std::string& ppt, int offset) {
  std::vector<unsigned> out;
  if (ppt == "none") return out;
  if (ppt == "basic") {
    for (int l = 0; l < legs; ++l) out.push_back(1u << (offset + l));
    unsigned all = 0;
    for (int l = 0; l < legs; ++l) all |= 1u << (offset + l);
    out.push_back(all);
  } else if (ppt == "pairs") {
    for (int l = 0; l < legs; ++l) out.push_back(1u << (offset + l));
    for (int l = 0; l < legs; ++l)
      for (int k = l + 1; k < legs; ++k) out.push_back(1u << (offset + l) | 1u << (offset + k));
    unsigned all = 0;
    for (int l = 0; l < legs; ++l) all |= 1u << (offset + l);
    out.push_back(all);
  } else if (ppt == "legs") {
    for (unsigned s = 1; s < (1u << legs); ++s) out.push_back(s << offset);
  } else {
    throw RelaxError("unknown PPT schedule '" + ppt + "'");
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

CompiledRelaxation compile_prepare_measure(const Eigen::MatrixXd& c0, WitnessMode mode, const WitnessOptions& opt) {
  if (c0.rows() != 3 || c0.cols() != 3) throw RelaxError("the witness relaxation expects three preparations per side");
  if (opt.leg_length != 1) throw RelaxError("witness legs have length 1");
  const Eigen::MatrixXd c = opt.transposed ? Eigen::MatrixXd(c0.transpose()) : c0;
  CompiledRelaxation out;
  out.kind = "witness";
  sdp::LmiBuilder b;
  const RealMatrix P0 = (RealMatrix(2, 2) << 1, 0, 0, 0).finished();
  const RealMatrix P1 = RealMatrix::Identity(2, 2) - P0;
  const RealMatrix V = qlinalg::swap_matrix({2, 2}, 0, 1);
  std::ostringstream os;

  if (mode == WitnessMode::General) {
    // factors: C_A, C_B, u1, u2, v1, v2 (the third preparations are fixed to |0>)
    const int F = 6;
    std::vector<int> dims(F, 2);
    std::vector<unsigned> key(64);
    for (int i = 0; i < 64; ++i) {
      std::vector<int> dg;
      detail::digits(i, dims, dg);
      unsigned a = (dg[0] + dg[2] + dg[3]) % 2, bb = (dg[1] + dg[4] + dg[5]) % 2;
      key[i] = a | bb << 1;
    }
    MatrixVar om[2] = {add_matrix_var(b, key, 1.0), add_matrix_var(b, key, 1.0)};
    // Omega0 + Omega1 = S (x) I_4 on (C_A C_B) (x) legs
    for (int i = 0; i < 64; ++i)
      for (int j = i; j < 64; ++j) {
        if (key[i] != key[j]) continue;
        const int hi = i >> 4, hj = j >> 4, li = i & 15, lj = j & 15;
        std::vector<std::pair<int, double>> t{{om[0].at(i, j), 1.0}, {om[1].at(i, j), 1.0}};
        if (hi != hj) {
          b.add_equality(t, 0.0);
        } else if (hi > 0) {
          const int i0 = li, j0 = lj;
          if (key[i0] != key[j0]) continue;
          t.emplace_back(om[0].at(i0, j0), -1.0);
          t.emplace_back(om[1].at(i0, j0), -1.0);
          b.add_equality(t, 0.0);
        }
      }
    std::vector<std::pair<int, double>> tr;
    for (int i = 0; i < 64; ++i) {
      tr.emplace_back(om[0].at(i, i), 1.0);
      tr.emplace_back(om[1].at(i, i), 1.0);
    }
    b.add_equality(tr, 4.0);
    auto masks = qubit_masks(4, opt.ppt, 0);
    for (int k = 0; k < 2; ++k) {
      add_transposed_block(b, om[k], F, 0, 4.0, "omega" + std::to_string(k));
      // leg subsets live on factors 2..5
      for (unsigned m : masks) add_transposed_block(b, om[k], F, m << 2, 4.0, "omega" + std::to_string(k) + "_pt");
    }
    std::vector<RealMatrix> A(3), B(3);
    A[0] = detail::embed(V, dims, {0, 2});
    A[1] = detail::embed(V, dims, {0, 3});
    A[2] = detail::embed(P0, dims, {0});
    B[0] = detail::embed(V, dims, {1, 4});
    B[1] = detail::embed(V, dims, {1, 5});
    B[2] = detail::embed(P0, dims, {1});
    for (int x = 0; x < 3; ++x)
      for (int y = 0; y < 3; ++y)
        if (c(x, y) != 0.0) add_trace_objective(b, om[0], A[x] * B[y], c(x, y));
    os << "witness (general measurements): two 64x64 branches, " << masks.size() << " PPT cuts per branch";
  } else {
    // M0 = |0><0| (x) |0><0| + |1><1| (x) |b2><b2|; factors u1 u2 u3 v1 v2 v3 b2
    const int F = 7;
    std::vector<int> dims(F, 2);
    std::vector<unsigned> key(128);
    for (int i = 0; i < 128; ++i) {
      std::vector<int> dg;
      detail::digits(i, dims, dg);
      unsigned a = (dg[0] + dg[1] + dg[2]) % 2, bb = (dg[3] + dg[4] + dg[5] + dg[6]) % 2;
      key[i] = a | bb << 1;
    }
    MatrixVar w = add_matrix_var(b, key, 1.0);
    std::vector<std::pair<int, double>> tr;
    for (int i = 0; i < 128; ++i) tr.emplace_back(w.at(i, i), 1.0);
    b.add_equality(tr, 1.0);
    add_transposed_block(b, w, F, 0, 1.0, "state");
    auto masks = qubit_masks(F, opt.ppt, 0);
    for (unsigned m : masks) add_transposed_block(b, w, F, m, 1.0, "state_pt");
    for (int x = 0; x < 3; ++x)
      for (int y = 0; y < 3; ++y) {
        if (c(x, y) == 0.0) continue;
        RealMatrix O = detail::embed(qlinalg::kron_real(P0, P0), dims, {x, 3 + y}) +
                       detail::embed(qlinalg::kron_real(P1, V), dims, {x, 3 + y, 6});
        add_trace_objective(b, w, O, c(x, y));
      }
    os << "witness (unentangled rank-2 measurements" << (opt.transposed ? ", ports exchanged" : "") << "): 128x128 state, "
       << masks.size() << " PPT cuts";
    out.caveats.push_back(
        "separable measurements are modelled as rank-2 projectors made of two orthogonal product projectors; "
        "the bound holds under that identification only");
  }
  out.lmi = b.build();
  out.summary = os.str();
  return out;
}

}  // namespace dimbound::relax
