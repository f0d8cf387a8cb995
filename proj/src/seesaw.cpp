#include "dimbound/seesaw.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dimbound::seesaw {

using qlinalg::Complex;

// ---- rank profiles ----

RankProfile RankProfile::nondegenerate(const bell::Scenario& s, const std::vector<int>& dims) {
  RankProfile r;
  for (int p = 0; p < s.parties(); ++p) {
    auto& party = r.ranks.emplace_back();
    for (int x = 0; x < s.settings(p); ++x) {
      const int k = s.outcome_count(p, x), d = dims[p];
      // spread the dimension as evenly as possible, larger ranks last
      std::vector<int> v(k, d / k);
      for (int a = 0; a < d % k; ++a) ++v[k - 1 - a];
      party.push_back(v);
    }
  }
  return r;
}

bool RankProfile::degenerate() const {
  for (const auto& party : ranks)
    for (const auto& setting : party) {
      if (setting.size() < 2) continue;
      for (int r : setting)
        if (r == 0) return true;
    }
  return false;
}

void RankProfile::check(const bell::Scenario& s, const std::vector<int>& dims) const {
  if (static_cast<int>(ranks.size()) != s.parties()) throw bell::BellError("profile party count");
  for (int p = 0; p < s.parties(); ++p) {
    if (static_cast<int>(ranks[p].size()) != s.settings(p)) throw bell::BellError("profile settings");
    for (int x = 0; x < s.settings(p); ++x) {
      const auto& v = ranks[p][x];
      if (static_cast<int>(v.size()) != s.outcome_count(p, x)) throw bell::BellError("profile outcomes");
      int sum = 0;
      for (int r : v) {
        if (r < 0) throw bell::BellError("negative rank in profile");
        sum += r;
      }
      if (sum != dims[p]) throw bell::BellError("profile ranks must sum to the local dimension");
    }
  }
}

std::string RankProfile::describe() const {
  std::ostringstream os;
  for (std::size_t p = 0; p < ranks.size(); ++p) {
    if (p) os << " | ";
    for (std::size_t x = 0; x < ranks[p].size(); ++x) {
      os << (x ? " " : "") << "(";
      for (std::size_t a = 0; a < ranks[p][x].size(); ++a) os << (a ? "," : "") << ranks[p][x][a];
      os << ")";
    }
  }
  return os.str();
}

std::vector<RankProfile> enumerate_profiles(const bell::Scenario& s, const std::vector<int>& dims,
                                            const std::vector<int>& parties, int max_degenerate) {
  RankProfile base = RankProfile::nondegenerate(s, dims);
  std::vector<RankProfile> out{base};
  // candidate (party, setting, degenerate rank vector)
  struct Option {
    int p, x;
    std::vector<int> r;
  };
  std::vector<Option> opts;
  for (int p : parties)
    for (int x = 0; x < s.settings(p); ++x) {
      const int k = s.outcome_count(p, x);
      if (k < 2) continue;
      for (int a = 0; a < k; ++a) {
        std::vector<int> r(k, 0);
        r[a] = dims[p];
        opts.push_back({p, x, r});
      }
    }
  // combinations of up to max_degenerate options on distinct settings
  std::vector<int> pick;
  auto rec = [&](auto&& self, std::size_t from) -> void {
    if (!pick.empty()) {
      RankProfile r = base;
      for (int i : pick) r.ranks[opts[i].p][opts[i].x] = opts[i].r;
      out.push_back(r);
    }
    if (static_cast<int>(pick.size()) == max_degenerate) return;
    for (std::size_t i = from; i < opts.size(); ++i) {
      bool clash = false;
      for (int j : pick) clash |= opts[j].p == opts[i].p && opts[j].x == opts[i].x;
      if (clash) continue;
      pick.push_back(static_cast<int>(i));
      self(self, i + 1);
      pick.pop_back();
    }
  };
  rec(rec, 0);
  return out;
}

// ---- randomness ----

Matrix haar_unitary(int d, std::mt19937_64& rng, bool real) {
  std::normal_distribution<double> g;
  Matrix z(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) z(i, j) = real ? Complex(g(rng), 0.0) : Complex(g(rng), g(rng));
  Eigen::HouseholderQR<Matrix> qr(z);
  Matrix q = qr.householderQ();
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < d; ++i) {
    Complex ph = r(i, i) / std::abs(r(i, i));
    q.col(i) *= ph;
  }
  return q;
}

namespace {

Vector random_vector(Eigen::Index n, std::mt19937_64& rng, bool real) {
  std::normal_distribution<double> g;
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = real ? Complex(g(rng), 0.0) : Complex(g(rng), g(rng));
  return v.normalized();
}

std::vector<Matrix> projectors_from_basis(const Matrix& u, const std::vector<int>& ranks) {
  std::vector<Matrix> out;
  int col = 0;
  for (int r : ranks) {
    Matrix p = u.middleCols(col, r) * u.middleCols(col, r).adjoint();
    out.push_back(0.5 * (p + p.adjoint()));
    col += r;
  }
  return out;
}

Eigen::Index total_dim(const std::vector<int>& dims) {
  Eigen::Index t = 1;
  for (int d : dims) t *= d;
  return t;
}

double expectation(const Matrix& B, const Vector& psi) { return psi.dot(B * psi).real(); }

}  // namespace

Strategy random_strategy(const bell::Scenario& sc, const std::vector<int>& dims,
                         const RankProfile& profile, std::mt19937_64& rng, bool real) {
  profile.check(sc, dims);
  Strategy s;
  s.dims = dims;
  Vector psi = random_vector(total_dim(dims), rng, real);
  s.state = psi * psi.adjoint();
  for (int p = 0; p < sc.parties(); ++p) {
    auto& party = s.measurements.emplace_back();
    for (int x = 0; x < sc.settings(p); ++x)
      party.push_back(projectors_from_basis(haar_unitary(dims[p], rng, real), profile.ranks[p][x]));
  }
  return s;
}

// ---- exact partial updates ----

std::pair<Vector, double> optimal_state(const BellFunctional& f, const Strategy& s) {
  Matrix B = bell::bell_operator(f, s);
  auto e = qlinalg::herm_eig(0.5 * (B + B.adjoint()));
  return {e.vectors.col(0), e.values(0)};
}

std::vector<Matrix> conditioned_operators(const BellFunctional& f, const Strategy& s,
                                          const Vector& psi, int party, int setting) {
  const int n = static_cast<int>(s.dims.size());
  const int dk = s.dims[party];
  const Eigen::Index rest = total_dim(s.dims) / dk;
  // Psi(i, m): party index i, remaining parties in order
  Matrix Psi(dk, rest);
  {
    Eigen::Index stride = 1;
    for (int p = n - 1; p > party; --p) stride *= s.dims[p];
    for (Eigen::Index flat = 0; flat < psi.size(); ++flat) {
      Eigen::Index i = (flat / stride) % dk;
      Eigen::Index m = (flat / (stride * dk)) * stride + flat % stride;
      Psi(i, m) = psi(flat);
    }
  }
  const int k = static_cast<int>(s.measurements[party][setting].size());
  std::vector<Matrix> K(k, Matrix::Zero(rest, rest));
  for (const auto& [t, c] : f.coefficients) {
    if (t.settings[party] != setting) continue;
    Matrix op = Matrix::Ones(1, 1);
    for (int p = 0; p < n; ++p) {
      if (p == party) continue;
      const Matrix id = Matrix::Identity(s.dims[p], s.dims[p]);
      const Matrix& m = t.settings[p] < 0 ? id : s.measurements[p][t.settings[p]][t.outcomes[p]];
      Matrix next(op.rows() * m.rows(), op.cols() * m.cols());
      for (Eigen::Index i = 0; i < op.rows(); ++i)
        for (Eigen::Index j = 0; j < op.cols(); ++j)
          next.block(i * m.rows(), j * m.cols(), m.rows(), m.cols()) = op(i, j) * m;
      op = std::move(next);
    }
    K[t.outcomes[party]] += c * op;
  }
  std::vector<Matrix> G;
  for (int a = 0; a < k; ++a) {
    Matrix g = Psi * K[a].transpose() * Psi.adjoint();
    G.push_back(0.5 * (g + g.adjoint()));
  }
  return G;
}

std::vector<Matrix> best_projective(const std::vector<Matrix>& G, const std::vector<int>& ranks,
                                    const std::vector<Matrix>& start) {
  const int k = static_cast<int>(G.size());
  const Eigen::Index d = G[0].rows();
  if (k == 1) return {Matrix::Identity(d, d)};
  if (k == 2) {
    auto e = qlinalg::herm_eig(G[0] - G[1]);
    return projectors_from_basis(e.vectors, ranks);
  }
  // pairwise re-splitting inside the span of two outcomes
  std::vector<Matrix> P = start;
  for (int sweep = 0; sweep < 20; ++sweep) {
    bool changed = false;
    for (int a = 0; a < k; ++a)
      for (int b = a + 1; b < k; ++b) {
        const int r = ranks[a] + ranks[b];
        if (r == 0 || ranks[a] == 0 || ranks[b] == 0) continue;
        auto span = qlinalg::herm_eig(P[a] + P[b]);
        Matrix V = span.vectors.leftCols(r);
        Matrix H = V.adjoint() * (G[a] - G[b]) * V;
        auto e = qlinalg::herm_eig(0.5 * (H + H.adjoint()));
        Matrix W = V * e.vectors;
        auto np = projectors_from_basis(W, {ranks[a], ranks[b]});
        double before = (G[a] * P[a]).trace().real() + (G[b] * P[b]).trace().real();
        double after = (G[a] * np[0]).trace().real() + (G[b] * np[1]).trace().real();
        if (after > before + 1e-14) {
          P[a] = np[0];
          P[b] = np[1];
          changed = true;
        }
      }
    if (!changed) break;
  }
  return P;
}

void optimal_measurement(const BellFunctional& f, Strategy& s, const Vector& psi, int party,
                         int setting, const std::vector<int>& ranks) {
  auto G = conditioned_operators(f, s, psi, party, setting);
  s.measurements[party][setting] = best_projective(G, ranks, s.measurements[party][setting]);
}

// ---- the iteration ----

RestartTrace iterate(const BellFunctional& f, Strategy& s, const RankProfile& profile,
                     const Options& opt) {
  RestartTrace tr;
  // start from the current state's dominant vector
  auto es = qlinalg::herm_eig(s.state);
  Vector psi = es.vectors.col(0);
  if (opt.fix_state && es.values.size() > 1 && es.values(1) > 1e-9)
    throw bell::BellError("fixed-state iteration needs a pure state");
  double value = expectation(bell::bell_operator(f, s), psi);
  tr.initial = value;
  const int n = static_cast<int>(s.dims.size());
  for (int it = 0; it < opt.max_iterations; ++it) {
    double before = value;
    for (int p = 0; p < n; ++p)
      for (int x = 0; x < static_cast<int>(s.measurements[p].size()); ++x) {
        optimal_measurement(f, s, psi, p, x, profile.ranks[p][x]);
        double v = expectation(bell::bell_operator(f, s), psi);
        if (v < value - 1e-9) ++tr.monotonicity_violations;
        value = v;
      }
    if (!opt.fix_state) {
      auto [v, top] = optimal_state(f, s);
      if (top < value - 1e-9) ++tr.monotonicity_violations;
      psi = v;
      value = top;
    }
    tr.iterations = it + 1;
    if (value - before < opt.tol) break;
  }
  s.state = psi * psi.adjoint();
  tr.final = value;
  return tr;
}

RunResult run(const BellFunctional& f, const std::vector<int>& dims,
              const std::vector<RankProfile>& profiles, const Options& opt) {
  RunResult res;
  std::mt19937_64 rng(opt.seed);
  for (const auto& prof : profiles) {
    double best_here = -1e300;
    for (int r = 0; r < opt.restarts; ++r) {
      Strategy s = random_strategy(f.scenario, dims, prof, rng, opt.real);
      RestartTrace tr = iterate(f, s, prof, opt);
      res.traces.push_back(tr);
      double v = bell::evaluate(f, bell::strategy_to_table(s));
      best_here = std::max(best_here, v);
      if (v > res.value) {
        res.value = v;
        res.operator_value = tr.final;
        res.best = s;
        res.profile = prof;
      }
    }
    res.per_profile.emplace_back(prof.describe(), best_here);
  }
  return res;
}

// ---- prepare-and-measure ----

Eigen::MatrixXd witness_matrix(const BellFunctional& w) {
  if (w.scenario.parties() != 3) throw bell::BellError("witness needs three roles");
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(w.scenario.settings(0), w.scenario.settings(1));
  for (const auto& [t, v] : w.coefficients) {
    if (t.settings[0] < 0 || t.settings[1] < 0 || t.settings[2] < 0 || t.outcomes[2] != 0)
      throw bell::BellError("witness terms must be P(0|x,y)");
    c(t.settings[0], t.settings[1]) += v;
  }
  return c;
}

namespace {

Matrix kron2(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Matrix proj(const Vector& v) { return v * v.adjoint(); }

// <.|_B M |.>_B contracted with a vector on the second port
Matrix contract_second(const Matrix& M, const Vector& b) {
  Matrix out = Matrix::Zero(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) out(i, j) += std::conj(b(k)) * M(2 * i + k, 2 * j + l) * b(l);
  return out;
}

Matrix contract_first(const Matrix& M, const Vector& a) {
  Matrix out = Matrix::Zero(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) out(k, l) += std::conj(a(i)) * M(2 * i + k, 2 * j + l) * a(j);
  return out;
}

Vector top_vector(const Matrix& h) { return qlinalg::herm_eig(0.5 * (h + h.adjoint())).vectors.col(0); }

void update_states(const Eigen::MatrixXd& c, PrepareMeasureStrategy& s) {
  for (int x = 0; x < c.rows(); ++x) {
    Matrix h = Matrix::Zero(2, 2);
    for (int y = 0; y < c.cols(); ++y) h += c(x, y) * contract_second(s.M0, s.bob[y]);
    s.alice[x] = top_vector(h);
  }
  for (int y = 0; y < c.cols(); ++y) {
    Matrix h = Matrix::Zero(2, 2);
    for (int x = 0; x < c.rows(); ++x) h += c(x, y) * contract_first(s.M0, s.alice[x]);
    s.bob[y] = top_vector(h);
  }
}

// One-way product measurement M0 = P_a (x) |b1><b1| + P_a' (x) |b2><b2|.
struct OneWay {
  Vector a, b1, b2;
};

Matrix one_way_M0(const OneWay& w) {
  Vector ap(2);
  ap << -std::conj(w.a(1)), std::conj(w.a(0));
  return kron2(proj(w.a), proj(w.b1)) + kron2(proj(ap), proj(w.b2));
}

void update_one_way(const Eigen::MatrixXd& c, const PrepareMeasureStrategy& s, OneWay& w) {
  Vector ap(2);
  ap << -std::conj(w.a(1)), std::conj(w.a(0));
  Matrix x1 = Matrix::Zero(2, 2), x2 = Matrix::Zero(2, 2);
  for (int x = 0; x < c.rows(); ++x)
    for (int y = 0; y < c.cols(); ++y) {
      x1 += c(x, y) * std::norm(w.a.dot(s.alice[x])) * proj(s.bob[y]);
      x2 += c(x, y) * std::norm(ap.dot(s.alice[x])) * proj(s.bob[y]);
    }
  w.b1 = top_vector(x1);
  w.b2 = top_vector(x2);
  Matrix y1 = Matrix::Zero(2, 2), y2 = Matrix::Zero(2, 2);
  for (int x = 0; x < c.rows(); ++x)
    for (int y = 0; y < c.cols(); ++y) {
      y1 += c(x, y) * std::norm(w.b1.dot(s.bob[y])) * proj(s.alice[x]);
      y2 += c(x, y) * std::norm(w.b2.dot(s.bob[y])) * proj(s.alice[x]);
    }
  w.a = top_vector(y1 - y2);
}

Matrix positive_projector(const Matrix& h) {
  auto e = qlinalg::herm_eig(0.5 * (h + h.adjoint()));
  Matrix p = Matrix::Zero(h.rows(), h.cols());
  for (Eigen::Index i = 0; i < e.values.size(); ++i)
    if (e.values(i) > 0) p += proj(e.vectors.col(i));
  return p;
}

Matrix swap_ports(const Matrix& M) {
  Matrix out(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) out((i % 2) * 2 + i / 2, (j % 2) * 2 + j / 2) = M(i, j);
  return out;
}

}  // namespace

double prepare_measure_value(const Eigen::MatrixXd& c, const PrepareMeasureStrategy& s) {
  double v = 0.0;
  for (int x = 0; x < c.rows(); ++x)
    for (int y = 0; y < c.cols(); ++y) {
      Vector ab(4);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) ab(2 * i + j) = s.alice[x](i) * s.bob[y](j);
      v += c(x, y) * ab.dot(s.M0 * ab).real();
    }
  return v;
}

PrepareMeasureResult run_prepare_measure(const Eigen::MatrixXd& c, MeasurementClass cls,
                                         const Options& opt) {
  PrepareMeasureResult res;
  std::mt19937_64 rng(opt.seed);
  const int orientations = cls == MeasurementClass::Unentangled ? 2 : 1;
  for (int orient = 0; orient < orientations; ++orient) {
    const Eigen::MatrixXd cc = orient == 0 ? c : Eigen::MatrixXd(c.transpose());
    for (int r = 0; r < opt.restarts; ++r) {
      PrepareMeasureStrategy s;
      for (int x = 0; x < cc.rows(); ++x) s.alice.push_back(random_vector(2, rng, opt.real));
      for (int y = 0; y < cc.cols(); ++y) s.bob.push_back(random_vector(2, rng, opt.real));
      OneWay w{random_vector(2, rng, opt.real), random_vector(2, rng, opt.real),
               random_vector(2, rng, opt.real)};
      double value = -1e300;
      for (int it = 0; it < opt.max_iterations; ++it) {
        if (cls == MeasurementClass::General) {
          Matrix T = Matrix::Zero(4, 4);
          for (int x = 0; x < cc.rows(); ++x)
            for (int y = 0; y < cc.cols(); ++y)
              T += cc(x, y) * kron2(proj(s.alice[x]), proj(s.bob[y]));
          s.M0 = positive_projector(T);
        } else {
          update_one_way(cc, s, w);
          s.M0 = one_way_M0(w);
        }
        update_states(cc, s);
        double v = prepare_measure_value(cc, s);
        if (v - value < opt.tol && it > 0) {
          value = std::max(value, v);
          break;
        }
        value = v;
      }
      if (value > res.value) {
        res.value = value;
        res.best = s;
        if (orient == 1) {
          std::swap(res.best.alice, res.best.bob);
          res.best.M0 = swap_ports(s.M0);
        }
      }
    }
  }
  return res;
}

}  // namespace dimbound::seesaw
