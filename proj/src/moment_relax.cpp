#include "dimbound/moment_relax.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "relax_internal.hpp"

namespace dimbound::relax {

// ---- words ----

std::string Word::str() const {
  if (letters.empty()) return "I";
  std::ostringstream os;
  for (std::size_t i = 0; i < letters.size(); ++i)
    os << (i ? " " : "") << char('A' + letters[i].party) << letters[i].setting << "|" << letters[i].outcome;
  return os.str();
}

std::optional<Word> canonical_word(std::vector<Letter> raw) {
  std::stable_sort(raw.begin(), raw.end(), [](const Letter& a, const Letter& b) { return a.party < b.party; });
  Word w;
  for (const auto& l : raw) {
    if (!w.letters.empty()) {
      const auto& last = w.letters.back();
      if (last.party == l.party && last.setting == l.setting) {
        if (last.outcome == l.outcome) continue;
        return std::nullopt;
      }
    }
    w.letters.push_back(l);
  }
  return w;
}

Word dagger(const Word& w) {
  Word out = w;
  auto& v = out.letters;
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    while (j < v.size() && v[j].party == v[i].party) ++j;
    std::reverse(v.begin() + i, v.begin() + j);
    i = j;
  }
  return out;
}

std::optional<Word> multiply(const Word& a, const Word& b) {
  std::vector<Letter> raw = a.letters;
  raw.insert(raw.end(), b.letters.begin(), b.letters.end());
  return canonical_word(std::move(raw));
}

std::vector<Word> enumerate_words(const bell::Scenario& s, const std::vector<int>& parties, int n,
                                  int per_party) {
  std::vector<Letter> alphabet;
  for (int p : parties)
    for (int x = 0; x < s.settings(p); ++x)
      for (int a = 0; a + 1 < s.outcome_count(p, x); ++a) alphabet.push_back({p, x, a});
  std::vector<Word> out{Word{}};
  std::set<Word> seen{Word{}};
  std::vector<Word> level{Word{}};
  for (int len = 1; len <= n; ++len) {
    std::vector<Word> next;
    for (const auto& w : level)
      for (const auto& l : alphabet) {
        auto v = multiply(w, Word{{l}});
        if (!v || v->length() != len) continue;
        if (per_party > 0 &&
            std::count_if(v->letters.begin(), v->letters.end(), [&](const Letter& x) { return x.party == l.party; }) >
                per_party)
          continue;
        if (!seen.insert(*v).second) continue;
        next.push_back(*v);
      }
    std::sort(next.begin(), next.end());
    out.insert(out.end(), next.begin(), next.end());
    level = std::move(next);
  }
  return out;
}

// ---- compilation ----

namespace {

struct Builder {
  CompiledRelaxation& c;
  sdp::LmiBuilder lmi;
  std::vector<std::vector<int>> pair_class;  // [a][b] class of words[b]^dag words[a], -1 null
  std::vector<int> factor_dims;              // trusted factors: per party head then legs
  std::vector<int> factor_party;             // owning layout index
  std::vector<int> factor_leg;               // leg index inside the layout, -1 head

  explicit Builder(CompiledRelaxation& cc) : c(cc) {}

  int var_of(int cls, int k, int j) const {
    const auto& ci = c.classes[cls];
    if (ci.transposed) std::swap(k, j);
    if (c.classes[ci.rep].symmetric && k > j) std::swap(k, j);
    return c.class_vars[ci.rep][static_cast<std::size_t>(k) * c.D + j];
  }

  int add_class(const Word& w) {
    auto it = c.class_of.find(w);
    if (it != c.class_of.end()) return it->second;
    int id = static_cast<int>(c.classes.size());
    c.classes.push_back({w, id, false, false});
    c.class_of[w] = id;
    return id;
  }
};

// Trusted operator on the full trusted space from per-layout operators.
RealMatrix kron_all(const std::vector<RealMatrix>& ops) {
  RealMatrix out = RealMatrix::Ones(1, 1);
  for (const auto& o : ops) out = qlinalg::kron_real(out, o);
  return out;
}

std::vector<int> untrusted_of(const DiagramSpec& diagram, const bell::Scenario& s) {
  std::vector<int> out;
  for (int p = 0; p < s.parties(); ++p)
    if (std::none_of(diagram.trusted.begin(), diagram.trusted.end(),
                     [&](const PartyDiagram& pd) { return pd.party == p; }))
      out.push_back(p);
  return out;
}

// One PPT image of Gamma: partial transpose over the circles of `group`.
void add_ppt_block(Builder& B, const std::vector<Circle>& group, const std::string& label) {
  CompiledRelaxation& c = B.c;
  const int F = static_cast<int>(B.factor_dims.size());
  // per factor: 0 untouched, 1 fully transposed, 2 partially (expanded)
  std::vector<int> mode(F, 0);
  std::vector<std::vector<int>> copies(F);
  for (const auto& circ : group) {
    int f = -1;
    for (int g = 0; g < F; ++g) {
      const auto& L = c.trusted[B.factor_party[g]];
      if (L.party != circ.party) continue;
      if (circ.setting < 0 && B.factor_leg[g] < 0) f = g;
      if (circ.setting >= 0 && B.factor_leg[g] >= 0) {
        const auto& leg = L.legs[B.factor_leg[g]];
        if (leg.setting == circ.setting && leg.component == circ.component) f = g;
      }
    }
    if (f < 0) throw RelaxError("PPT circle not found in the layout");
    copies[f].push_back(circ.copy);
  }
  std::vector<int> edims(F);
  std::vector<std::vector<int>> kappa(F);
  std::vector<std::vector<double>> tau(F);
  std::vector<int> length(F, 1), local_d(F, 1);
  for (int f = 0; f < F; ++f) {
    const auto& L = c.trusted[B.factor_party[f]];
    local_d[f] = L.head_dim;
    if (B.factor_leg[f] >= 0) length[f] = L.legs[B.factor_leg[f]].length;
    std::sort(copies[f].begin(), copies[f].end());
    copies[f].erase(std::unique(copies[f].begin(), copies[f].end()), copies[f].end());
    if (copies[f].empty()) mode[f] = 0;
    else if (B.factor_leg[f] < 0 || static_cast<int>(copies[f].size()) == length[f]) mode[f] = 1;
    else mode[f] = 2;
    if (mode[f] == 2) {
      RealMatrix iso = qlinalg::sym_isometry(local_d[f], length[f]);
      edims[f] = static_cast<int>(iso.rows());
      for (Eigen::Index i = 0; i < iso.rows(); ++i)
        for (Eigen::Index k = 0; k < iso.cols(); ++k)
          if (iso(i, k) != 0.0) {
            kappa[f].push_back(static_cast<int>(k));
            tau[f].push_back(iso(i, k));
            break;
          }
    } else {
      edims[f] = B.factor_dims[f];
      for (int i = 0; i < edims[f]; ++i) {
        kappa[f].push_back(i);
        tau[f].push_back(1.0);
      }
    }
  }
  const long long E = detail::product(edims);
  const int W = static_cast<int>(c.words.size());
  const long long side = E * W;
  const int blk = B.lmi.add_block(static_cast<int>(side), static_cast<double>(W), label);

  // swap of row/col digits of one factor under the partial transpose
  auto transpose_local = [&](int f, int& i, int& j) {
    if (mode[f] == 1) std::swap(i, j);
    else if (mode[f] == 2) {
      const int d = local_d[f];
      std::vector<int> di(length[f]), dj(length[f]);
      int a = i, b = j;
      for (int k = length[f] - 1; k >= 0; --k) {
        di[k] = a % d;
        dj[k] = b % d;
        a /= d;
        b /= d;
      }
      for (int k : copies[f]) std::swap(di[k], dj[k]);
      i = j = 0;
      for (int k = 0; k < length[f]; ++k) {
        i = i * d + di[k];
        j = j * d + dj[k];
      }
    }
  };

  std::vector<std::vector<int>> edig(E);
  for (long long I = 0; I < E; ++I) detail::digits(I, edims, edig[I]);
  std::vector<int> kr(F), kc(F);
  for (int a = 0; a < W; ++a)
    for (int b = a; b < W; ++b) {
      const int cls = B.pair_class[a][b];
      if (cls < 0) continue;
      for (long long I = 0; I < E; ++I)
        for (long long J = (a == b ? I : 0); J < E; ++J) {
          double coef = 1.0;
          for (int f = 0; f < F; ++f) {
            int i = edig[I][f], j = edig[J][f];
            transpose_local(f, i, j);
            kr[f] = kappa[f][i];
            kc[f] = kappa[f][j];
            coef *= tau[f][i] * tau[f][j];
          }
          const int K = static_cast<int>(detail::compose(kr, B.factor_dims));
          const int Jc = static_cast<int>(detail::compose(kc, B.factor_dims));
          const int var = B.var_of(cls, K, Jc);
          if (var < 0) continue;
          B.lmi.add(blk, static_cast<int>(a * E + I), static_cast<int>(b * E + J), var, coef);
        }
    }
}

}  // namespace

long long predicted_side(const DiagramSpec& diagram, const bell::Scenario& s, int n, int per_party) {
  long long D = 1;
  for (const auto& pd : diagram.trusted) D *= build_party_layout(pd, s).dim;
  auto untrusted = untrusted_of(diagram, s);
  return D * static_cast<long long>(enumerate_words(s, untrusted, n, per_party).size());
}

CompiledRelaxation compile_hybrid(const DiagramSpec& diagram, const bell::BellFunctional& f, int n,
                                  const CompileOptions& opt) {
  const bell::Scenario& s = f.scenario;
  s.check();
  diagram.check(s);
  if (n < 1) throw RelaxError("moment order must be at least 1");

  CompiledRelaxation c;
  c.kind = diagram.trusted.empty() ? "npa" : "hybrid";
  c.diagram = diagram;
  c.order = n;
  for (const auto& pd : diagram.trusted) c.trusted.push_back(build_party_layout(pd, s));
  std::sort(c.trusted.begin(), c.trusted.end(), [](const PartyLayout& a, const PartyLayout& b) { return a.party < b.party; });
  c.untrusted = untrusted_of(diagram, s);
  if (c.untrusted.empty()) c.kind = "heads_legs";
  c.words = c.untrusted.empty() ? std::vector<Word>{Word{}} : enumerate_words(s, c.untrusted, n, opt.per_party);
  c.D = 1;
  for (const auto& L : c.trusted) c.D *= L.dim;
  if (c.side() > opt.max_side) {
    std::ostringstream os;
    os << "relaxation refused: predicted moment-matrix side " << c.side() << " exceeds the cap " << opt.max_side;
    throw RelaxError(os.str());
  }
  const int D = c.D;
  const int W = static_cast<int>(c.words.size());

  Builder B(c);
  for (int li = 0; li < static_cast<int>(c.trusted.size()); ++li) {
    const auto& L = c.trusted[li];
    for (int g = 0; g < static_cast<int>(L.factor_dims.size()); ++g) {
      B.factor_dims.push_back(L.factor_dims[g]);
      B.factor_party.push_back(li);
      B.factor_leg.push_back(g - 1);
    }
  }

  // sector keys of trusted basis vectors
  c.sector.assign(D, 0);
  {
    std::vector<int> pdims;
    for (const auto& L : c.trusted) pdims.push_back(L.dim);
    std::vector<int> dg;
    for (int K = 0; K < D; ++K) {
      detail::digits(K, pdims, dg);
      unsigned long long key = 0;
      int shift = 0;
      for (std::size_t p = 0; p < c.trusted.size(); ++p) {
        key |= static_cast<unsigned long long>(c.trusted[p].charge[dg[p]]) << shift;
        shift += std::max(1, c.trusted[p].head_dim - 1);
      }
      c.sector[K] = diagram.symmetry ? key : 0;
    }
  }

  // identification classes
  std::vector<Word> daggers;
  for (const auto& w : c.words) daggers.push_back(dagger(w));
  B.pair_class.assign(W, std::vector<int>(W, -1));
  for (int a = 0; a < W; ++a)
    for (int b = 0; b < W; ++b) {
      auto w = multiply(daggers[b], c.words[a]);
      if (!w) continue;
      B.pair_class[a][b] = B.add_class(*w);
      B.add_class(dagger(*w));
    }
  for (int k = 0; k < static_cast<int>(c.classes.size()); ++k) {
    auto& ci = c.classes[k];
    Word wd = dagger(ci.word);
    if (wd == ci.word) {
      ci.symmetric = true;
      ci.rep = k;
    } else {
      const int other = c.class_of.at(wd);
      ci.rep = ci.word < wd ? k : other;
      ci.transposed = ci.rep != k;
    }
  }
  c.class_vars.assign(c.classes.size(), {});
  for (int k = 0; k < static_cast<int>(c.classes.size()); ++k) {
    const auto& ci = c.classes[k];
    if (ci.rep != k) continue;
    auto& v = c.class_vars[k];
    v.assign(static_cast<std::size_t>(D) * D, -1);
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j) {
        if (c.sector[i] != c.sector[j]) continue;
        if (ci.symmetric && j < i) {
          v[static_cast<std::size_t>(i) * D + j] = v[static_cast<std::size_t>(j) * D + i];
          continue;
        }
        v[static_cast<std::size_t>(i) * D + j] = B.lmi.add_variable(1.0);
      }
  }
  if (B.lmi.variables() > opt.max_variables) {
    std::ostringstream os;
    os << "relaxation refused: " << B.lmi.variables() << " moment variables exceed the cap " << opt.max_variables;
    throw RelaxError(os.str());
  }

  // Gamma itself
  const int gblk = B.lmi.add_block(static_cast<int>(c.side()), static_cast<double>(W), "moment");
  for (int a = 0; a < W; ++a)
    for (int b = a; b < W; ++b) {
      const int cls = B.pair_class[a][b];
      if (cls < 0) continue;
      for (int k = 0; k < D; ++k)
        for (int j = (a == b ? k : 0); j < D; ++j) {
          const int var = B.var_of(cls, k, j);
          if (var >= 0) B.lmi.add(gblk, a * D + k, b * D + j, var, 1.0);
        }
    }

  // normalization
  const int idc = c.class_of.at(Word{});
  {
    std::vector<std::pair<int, double>> tr;
    for (int k = 0; k < D; ++k) tr.emplace_back(B.var_of(idc, k, k), 1.0);
    B.lmi.add_equality(tr, 1.0);
  }

  // orthogonality of same-setting legs
  auto trace_against = [&](const RealMatrix& O, int cls) {
    std::vector<std::pair<int, double>> terms;
    for (int k = 0; k < D; ++k)
      for (int j = 0; j < D; ++j) {
        if (O(j, k) == 0.0) continue;
        const int var = B.var_of(cls, k, j);
        if (var >= 0) terms.emplace_back(var, O(j, k));
      }
    return terms;
  };
  {
    std::set<int> targets;
    if (diagram.strict_orthogonality) {
      for (int k = 0; k < static_cast<int>(c.classes.size()); ++k) targets.insert(k);
    } else {
      for (int a = 0; a < W; ++a) targets.insert(B.pair_class[a][a]);
    }
    for (std::size_t p = 0; p < c.trusted.size(); ++p)
      for (const auto& op : c.trusted[p].orthogonal_ops) {
        std::vector<RealMatrix> parts;
        for (std::size_t q = 0; q < c.trusted.size(); ++q)
          parts.push_back(q == p ? op : RealMatrix(RealMatrix::Identity(c.trusted[q].dim, c.trusted[q].dim)));
        RealMatrix full = kron_all(parts);
        for (int cls : targets) {
          auto terms = trace_against(full, cls);
          if (!terms.empty()) B.lmi.add_equality(terms, 0.0);
        }
      }
  }

  // PPT images
  for (std::size_t g = 0; g < diagram.ppt_groups.size(); ++g)
    add_ppt_block(B, diagram.ppt_groups[g], "ppt" + std::to_string(g));

  // objective: every term expands into trusted operator (x) words
  std::map<int, RealMatrix> acc;
  for (const auto& [t, coef] : f.coefficients) {
    if (coef == 0.0) continue;
    std::vector<RealMatrix> parts;
    for (const auto& L : c.trusted) {
      const int x = t.settings[L.party];
      parts.push_back(x < 0 ? RealMatrix(RealMatrix::Identity(L.dim, L.dim)) : L.ops[x][t.outcomes[L.party]]);
    }
    RealMatrix O = kron_all(parts);
    std::vector<std::pair<Word, double>> expansion{{Word{}, 1.0}};
    for (int p : c.untrusted) {
      const int x = t.settings[p];
      if (x < 0) continue;
      const int a = t.outcomes[p], k = s.outcome_count(p, x);
      std::vector<std::pair<Word, double>> next;
      for (const auto& [w, v] : expansion) {
        if (a + 1 < k) {
          next.emplace_back(*multiply(w, Word{{{p, x, a}}}), v);
        } else {
          next.emplace_back(w, v);
          for (int b = 0; b + 1 < k; ++b) next.emplace_back(*multiply(w, Word{{{p, x, b}}}), -v);
        }
      }
      expansion = std::move(next);
    }
    for (const auto& [w, v] : expansion) {
      auto it = c.class_of.find(w);
      if (it == c.class_of.end())
        throw RelaxError("moment order " + std::to_string(n) + " too low to realize " + w.str());
      auto& m = acc[it->second];
      if (m.size() == 0) m = RealMatrix::Zero(D, D);
      m += coef * v * O;
    }
  }
  for (const auto& [cls, O] : acc)
    for (auto [var, x] : trace_against(O, cls)) B.lmi.add_objective(var, x);

  c.lmi = B.lmi.build();
  std::ostringstream os;
  os << c.kind << ": D=" << D << ", words=" << W << ", side=" << c.side() << ", variables=" << B.lmi.variables()
     << " (free " << c.lmi.reduced_variables() << "), blocks=" << c.lmi.problem.blocks.size();
  if (!diagram.trusted.empty()) os << "; " << diagram.describe();
  c.summary = os.str();
  return c;
}

CompiledRelaxation compile_npa(const bell::BellFunctional& f, int n, const CompileOptions& opt) {
  auto c = compile_hybrid(DiagramSpec{}, f, n, opt);
  c.kind = "npa";
  return c;
}

CompiledRelaxation second_order_hybrid(const DiagramSpec& diagram, const bell::BellFunctional& f,
                                       const CompileOptions& opt) {
  const long long side = predicted_side(diagram, f.scenario, 2, opt.per_party);
  if (side > opt.max_side) {
    std::ostringstream os;
    os << "second-order relaxation refused: predicted moment-matrix side " << side << " exceeds the cap "
       << opt.max_side;
    throw RelaxError(os.str());
  }
  auto c = compile_hybrid(diagram, f, 2, opt);
  c.summary.replace(0, c.kind.size(), "hybrid2");
  c.kind = "hybrid2";
  return c;
}

// ---- evaluation ----

RealMatrix CompiledRelaxation::moment(const RealVector& variables, const Word& w) const {
  RealMatrix m = RealMatrix::Zero(D, D);
  auto it = class_of.find(w);
  if (it == class_of.end()) return m;
  const auto& ci = classes[it->second];
  const auto& vars = class_vars[ci.rep];
  for (int k = 0; k < D; ++k)
    for (int j = 0; j < D; ++j) {
      const int var = vars[static_cast<std::size_t>(k) * D + j];
      if (var >= 0) m(k, j) = variables(var);
    }
  if (ci.transposed) m.transposeInPlace();
  return m;
}

RealMatrix CompiledRelaxation::gamma(const RealVector& variables) const {
  const int W = static_cast<int>(words.size());
  RealMatrix g = RealMatrix::Zero(side(), side());
  for (int a = 0; a < W; ++a)
    for (int b = 0; b < W; ++b) {
      auto w = multiply(dagger(words[b]), words[a]);
      if (!w) continue;
      g.block(static_cast<Eigen::Index>(a) * D, static_cast<Eigen::Index>(b) * D, D, D) = moment(variables, *w);
    }
  return g;
}

RelaxationResult solve_relaxation(const CompiledRelaxation& c, const sdp::Tolerances& tol) {
  RelaxationResult r;
  r.lmi = sdp::solve_lmi(c.lmi, tol);
  r.value = r.lmi.value;
  r.upper_bound = r.lmi.certified_upper;
  r.ok = r.lmi.converged();
  r.status = sdp::to_string(r.lmi.sdp.status);
  return r;
}

FeasibilityReport check_point(const CompiledRelaxation& c, const RealVector& variables) {
  FeasibilityReport rep;
  RealVector red = c.lmi.reduce(variables);
  RealVector back = c.lmi.expand(red);
  rep.equality_residual = back.size() ? (back - variables).cwiseAbs().maxCoeff() : 0.0;
  rep.min_eigenvalue = 1e300;
  for (const auto& m : c.lmi.blocks_at(red)) rep.min_eigenvalue = std::min(rep.min_eigenvalue, qlinalg::min_eigenvalue(m));
  rep.objective = c.lmi.objective_constant;
  for (int j = 0; j < c.lmi.reduced_variables(); ++j) rep.objective -= c.lmi.problem.constraints[j].rhs * red(j);
  return rep;
}

RealVector forward_build(const CompiledRelaxation& c, const bell::Strategy& st) {
  using qlinalg::Complex;
  const int P = static_cast<int>(st.dims.size());
  if (st.measurements.size() != st.dims.size()) throw RelaxError("strategy is missing measurements");
  std::vector<char> is_trusted(P, 0);
  for (const auto& L : c.trusted) {
    if (L.party >= P || st.dims[L.party] != L.head_dim)
      throw RelaxError("strategy dimension does not match the trusted head");
    is_trusted[L.party] = 1;
  }
  auto range_basis = [](const Matrix& m) {
    auto es = qlinalg::herm_eig(0.5 * (m + m.adjoint()));
    int r = 0;
    while (r < es.values.size() && es.values(r) > 0.5) ++r;
    return Matrix(es.vectors.leftCols(r));
  };

  // rotations of trusted parties and their compressed leg vectors
  std::vector<Matrix> U(P);
  std::vector<std::vector<qlinalg::Vector>> leg_vectors(c.trusted.size());
  for (std::size_t li = 0; li < c.trusted.size(); ++li) {
    const auto& L = c.trusted[li];
    const int p = L.party, d = L.head_dim;
    U[p] = Matrix::Identity(d, d);
    if (L.fixed_setting >= 0) {
      Matrix cols(d, 0);
      for (std::size_t a = 0; a < L.ranks[L.fixed_setting].size(); ++a) {
        Matrix b = range_basis(st.measurements[p][L.fixed_setting][a]);
        if (b.cols() != L.ranks[L.fixed_setting][a]) throw RelaxError("strategy ranks differ from the layout");
        Matrix grown(d, cols.cols() + b.cols());
        grown << cols, b;
        cols = grown;
      }
      U[p] = cols;
    }
    for (int x = 0; x < static_cast<int>(L.ranks.size()); ++x)
      for (std::size_t a = 0; a < L.ranks[x].size(); ++a) {
        Matrix b = range_basis(U[p].adjoint() * st.measurements[p][x][a] * U[p]);
        if (b.cols() != L.ranks[x][a]) throw RelaxError("strategy ranks differ from the layout");
      }
    for (const auto& leg : L.legs) {
      Matrix b = range_basis(U[p].adjoint() * st.measurements[p][leg.setting][leg.outcome] * U[p]);
      qlinalg::Vector phi = b.col(leg.component);
      // phi^{(x)N} projected on the symmetric basis
      qlinalg::Vector full = phi;
      for (int k = 1; k < leg.length; ++k) {
        qlinalg::Vector next(full.size() * d);
        for (Eigen::Index i = 0; i < full.size(); ++i)
          for (int j = 0; j < d; ++j) next(i * d + j) = full(i) * phi(j);
        full = next;
      }
      RealMatrix iso = qlinalg::sym_isometry(d, leg.length);
      leg_vectors[li].push_back(iso.transpose().cast<Complex>() * full);
    }
  }

  // rotated state, indices split into (trusted heads, untrusted)
  Matrix rot = Matrix::Ones(1, 1);
  for (int p = 0; p < P; ++p)
    rot = qlinalg::kron_matrices(std::vector<Matrix>{rot, is_trusted[p] ? U[p] : Matrix(Matrix::Identity(st.dims[p], st.dims[p]))});
  Matrix rho = rot.adjoint() * st.state * rot;
  std::vector<int> hdims, udims;
  for (int p = 0; p < P; ++p) (is_trusted[p] ? hdims : udims).push_back(st.dims[p]);
  const long long H = detail::product(hdims), Uu = detail::product(udims);
  std::vector<std::vector<long long>> joint(H, std::vector<long long>(Uu));
  {
    std::vector<int> hd, ud, all(P);
    for (long long h = 0; h < H; ++h) {
      detail::digits(h, hdims, hd);
      for (long long u = 0; u < Uu; ++u) {
        detail::digits(u, udims, ud);
        int ih = 0, iu = 0;
        for (int p = 0; p < P; ++p) all[p] = is_trusted[p] ? hd[ih++] : ud[iu++];
        joint[h][u] = detail::compose(all, st.dims);
      }
    }
  }

  // trusted basis vector K -> (joint head index, leg amplitude)
  const int D = c.D;
  std::vector<long long> head_of(D);
  std::vector<Complex> amp(D);
  {
    std::vector<int> pdims;
    for (const auto& L : c.trusted) pdims.push_back(L.dim);
    std::vector<int> dg, fd, hd(c.trusted.size());
    for (int K = 0; K < D; ++K) {
      detail::digits(K, pdims, dg);
      Complex a = 1.0;
      for (std::size_t li = 0; li < c.trusted.size(); ++li) {
        detail::digits(dg[li], c.trusted[li].factor_dims, fd);
        hd[li] = fd[0];
        for (std::size_t l = 0; l < c.trusted[li].legs.size(); ++l) a *= leg_vectors[li][l](fd[l + 1]);
      }
      head_of[K] = detail::compose(hd, hdims);
      amp[K] = a;
    }
  }

  RealVector vars = RealVector::Zero(c.lmi.original_variables);
  for (int cls = 0; cls < static_cast<int>(c.classes.size()); ++cls) {
    if (c.classes[cls].rep != cls) continue;
    // operator of the word on the untrusted spaces (letters applied in order)
    Matrix wop = Matrix::Ones(1, 1);
    for (int p = 0; p < P; ++p) {
      if (is_trusted[p]) continue;
      Matrix m = Matrix::Identity(st.dims[p], st.dims[p]);
      for (const auto& l : c.classes[cls].word.letters)
        if (l.party == p) m = m * st.measurements[p][l.setting][l.outcome];
      wop = qlinalg::kron_matrices(std::vector<Matrix>{wop, m});
    }
    // R(h, h') = sum_{u,u'} w(u,u') rho((h,u'),(h',u))
    Matrix R = Matrix::Zero(H, H);
    for (long long h = 0; h < H; ++h)
      for (long long h2 = 0; h2 < H; ++h2) {
        Complex s = 0.0;
        for (long long u = 0; u < Uu; ++u)
          for (long long u2 = 0; u2 < Uu; ++u2) {
            if (wop(u, u2) == Complex(0.0)) continue;
            s += wop(u, u2) * rho(joint[h][u2], joint[h2][u]);
          }
        R(h, h2) = s;
      }
    const auto& v = c.class_vars[cls];
    for (int k = 0; k < D; ++k)
      for (int j = 0; j < D; ++j) {
        const int var = v[static_cast<std::size_t>(k) * D + j];
        if (var < 0) continue;
        vars(var) = (R(head_of[k], head_of[j]) * amp[k] * std::conj(amp[j])).real();
      }
  }
  return vars;
}

// ---- certificates ----

Certificate extract_certificate(const CompiledRelaxation& c, const RealVector& variables, double floor, double tol) {
  Certificate cert;
  const int D = c.D, W = static_cast<int>(c.words.size());
  RealMatrix G = c.gamma(variables);
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(0.5 * (G + G.transpose()));
  const RealVector& lam = es.eigenvalues();
  std::vector<int> keep;
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    if (lam(i) > floor) keep.push_back(static_cast<int>(i));
  cert.rank = static_cast<int>(keep.size());
  const int r = cert.rank;
  cert.vectors = RealMatrix::Zero(r, G.rows());
  for (int i = 0; i < r; ++i) cert.vectors.row(i) = std::sqrt(lam(keep[i])) * es.eigenvectors().col(keep[i]).transpose();
  auto psi = [&](int word, int k) { return RealVector(cert.vectors.col(static_cast<Eigen::Index>(word) * D + k)); };

  cert.state = RealVector::Zero(static_cast<Eigen::Index>(D) * r);
  for (int k = 0; k < D; ++k) cert.state.segment(static_cast<Eigen::Index>(k) * r, r) = psi(0, k);

  // projectors onto spans of the vectors whose word starts (in its party) with a letter
  std::map<Letter, RealMatrix> proj;
  std::set<Letter> letters;
  for (const auto& w : c.words)
    for (const auto& l : w.letters) letters.insert(l);
  for (const auto& l : letters) {
    std::vector<RealVector> span;
    for (int a = 0; a < W; ++a) {
      const auto& ls = c.words[a].letters;
      auto it = std::find_if(ls.begin(), ls.end(), [&](const Letter& x) { return x.party == l.party; });
      if (it == ls.end() || !(*it == l)) continue;
      for (int k = 0; k < D; ++k) span.push_back(psi(a, k));
    }
    RealMatrix M(r, static_cast<Eigen::Index>(span.size()));
    for (std::size_t i = 0; i < span.size(); ++i) M.col(static_cast<Eigen::Index>(i)) = span[i];
    RealMatrix P = RealMatrix::Zero(r, r);
    if (M.cols() > 0 && r > 0) {
      Eigen::JacobiSVD<RealMatrix> svd(M, Eigen::ComputeThinU);
      const double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
      for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > 1e-7 * std::max(1.0, smax)) P += svd.matrixU().col(i) * svd.matrixU().col(i).transpose();
    }
    proj[l] = P;
  }
  // grouped per untrusted party / setting, last outcome = complement
  for (int p : c.untrusted) {
    auto& party = cert.projectors.emplace_back();
    int maxx = -1;
    for (const auto& l : letters)
      if (l.party == p) maxx = std::max(maxx, l.setting);
    for (int x = 0; x <= maxx; ++x) {
      auto& setting = party.emplace_back();
      RealMatrix rest = RealMatrix::Identity(r, r);
      int outcomes = 0;
      for (const auto& l : letters)
        if (l.party == p && l.setting == x) outcomes = std::max(outcomes, l.outcome + 1);
      for (int b = 0; b < outcomes; ++b) {
        auto it = proj.find({p, x, b});
        RealMatrix P = it == proj.end() ? RealMatrix(RealMatrix::Zero(r, r)) : it->second;
        setting.push_back(P);
        rest -= P;
      }
      setting.push_back(rest);
      for (std::size_t b = 0; b < setting.size(); ++b)
        for (std::size_t b2 = b + 1; b2 < setting.size(); ++b2)
          cert.orthogonality_error = std::max(cert.orthogonality_error, (setting[b] * setting[b2]).norm());
    }
  }

  // reconstructed vectors s^ psi_(I,k), letters applied right to left
  auto apply = [&](const Word& w, RealVector v) {
    for (auto it = w.letters.rbegin(); it != w.letters.rend(); ++it) v = proj.at(*it) * v;
    return v;
  };
  std::vector<std::vector<RealVector>> rec(W, std::vector<RealVector>(D));
  for (int a = 0; a < W; ++a)
    for (int k = 0; k < D; ++k) rec[a][k] = apply(c.words[a], psi(0, k));
  for (int a = 0; a < W; ++a)
    for (int b = 0; b < W; ++b)
      for (int k = 0; k < D; ++k)
        for (int j = 0; j < D; ++j) {
          const double got = rec[b][j].dot(rec[a][k]);
          cert.moment_error = std::max(cert.moment_error, std::abs(got - G(a * D + k, b * D + j)));
        }

  // every class moment (which the probabilities are read from) against its
  // reconstruction <psi_(I,j)| w^ |psi_(I,k)>
  for (const auto& ci : c.classes) {
    bool known = true;
    for (const auto& l : ci.word.letters) known = known && proj.count(l);
    if (!known) continue;
    RealMatrix m = c.moment(variables, ci.word);
    for (int k = 0; k < D; ++k) {
      RealVector v = apply(ci.word, psi(0, k));
      for (int j = 0; j < D; ++j) cert.probability_error = std::max(cert.probability_error, std::abs(psi(0, j).dot(v) - m(k, j)));
    }
  }
  cert.ok = cert.moment_error < tol && cert.orthogonality_error < tol && cert.probability_error < tol;
  std::ostringstream os;
  os << "rank " << r << ", moment error " << cert.moment_error << ", orthogonality error " << cert.orthogonality_error
     << ", moment-class error " << cert.probability_error << (cert.ok ? " (reproduced)" : " (NOT reproduced)");
  cert.report = os.str();
  return cert;
}

bell::BellFunctional fix_outcome(const bell::BellFunctional& f, int party, int setting, int outcome) {
  const auto& s = f.scenario;
  if (party < 0 || party >= s.parties() || setting < 0 || setting >= s.settings(party) || outcome < 0 ||
      outcome >= s.outcome_count(party, setting))
    throw RelaxError("fixed outcome out of range");
  if (s.settings(party) < 2) throw RelaxError("cannot remove the only setting of a party");
  bell::BellFunctional g;
  g.name = f.name + " [" + char('A' + party) + std::to_string(setting) + "->" + std::to_string(outcome) + "]";
  g.scenario = s;
  g.scenario.outcomes[party].erase(g.scenario.outcomes[party].begin() + setting);
  for (const auto& [t, c] : f.coefficients) {
    bell::Term u = t;
    const int x = t.settings[party];
    if (x == setting) {
      if (t.outcomes[party] != outcome) continue;
      u.settings[party] = -1;
      u.outcomes[party] = -1;
    } else if (x > setting) {
      u.settings[party] = x - 1;
    }
    g.add(u, c);
  }
  return g;
}

}  // namespace dimbound::relax
