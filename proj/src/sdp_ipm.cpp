// Infeasible primal-dual path-following method, HKM search direction with
// Mehrotra predictor-corrector steps.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "dimbound/sdp.hpp"

namespace dimbound::sdp {

namespace {

using Mats = std::vector<RealMatrix>;

struct Part {
  int con;
  int begin, end;             // slice of the block's entry arrays
  std::vector<int> rows;      // distinct touched rows
  bool dense = false;
};

struct BlockData {
  int n = 0;
  std::vector<int> r, c;      // entry coordinates
  std::vector<int> lr, lc;    // local row positions inside the owning part
  std::vector<double> v;
  std::vector<Part> parts;    // ordered by constraint index
  RealMatrix C;
};

struct Internal {
  int m = 0;
  RealVector b;
  std::vector<BlockData> blocks;
};

// ---- preprocessing: split blocks into connected components ----

struct Split {
  Internal data;
  // original (block, index) -> (internal block or -1, local index)
  std::vector<std::vector<std::pair<int, int>>> where;
};

int find_root(std::vector<int>& p, int x) {
  while (p[x] != x) x = p[x] = p[p[x]];
  return x;
}

Split build_internal(const SdpProblem& prob) {
  const int nb = static_cast<int>(prob.blocks.size());
  std::vector<std::vector<int>> parent(nb);
  std::vector<std::vector<char>> used(nb);
  for (int k = 0; k < nb; ++k) {
    parent[k].resize(prob.blocks[k].size);
    std::iota(parent[k].begin(), parent[k].end(), 0);
    used[k].assign(prob.blocks[k].size, 0);
  }
  auto touch = [&](const Entry& e) {
    used[e.block][e.row] = used[e.block][e.col] = 1;
    int a = find_root(parent[e.block], e.row), b = find_root(parent[e.block], e.col);
    if (a != b) parent[e.block][std::max(a, b)] = std::min(a, b);
  };
  for (const auto& e : prob.objective) touch(e);
  for (const auto& con : prob.constraints)
    for (const auto& e : con.coeffs) touch(e);

  Split s;
  s.where.resize(nb);
  std::vector<std::vector<int>> comp_block(nb);
  for (int k = 0; k < nb; ++k) {
    const int n = prob.blocks[k].size;
    s.where[k].assign(n, {-1, -1});
    std::vector<int> root_to_block(n, -1);
    for (int i = 0; i < n; ++i) {
      if (!used[k][i]) continue;
      int root = find_root(parent[k], i);
      if (root_to_block[root] < 0) {
        root_to_block[root] = static_cast<int>(s.data.blocks.size());
        s.data.blocks.emplace_back();
      }
      auto& bd = s.data.blocks[root_to_block[root]];
      s.where[k][i] = {root_to_block[root], bd.n++};
    }
  }
  for (auto& bd : s.data.blocks) bd.C = RealMatrix::Zero(bd.n, bd.n);
  for (const auto& e : prob.objective) {
    auto [b, i] = s.where[e.block][e.row];
    int j = s.where[e.block][e.col].second;
    s.data.blocks[b].C(i, j) += e.value;
    if (i != j) s.data.blocks[b].C(j, i) += e.value;
  }

  s.data.m = static_cast<int>(prob.constraints.size());
  s.data.b.resize(s.data.m);
  for (int i = 0; i < s.data.m; ++i) {
    const auto& con = prob.constraints[i];
    s.data.b(i) = con.rhs;
    // group entries by internal block, keeping constraint order
    std::vector<std::pair<int, int>> tmp;
    for (std::size_t q = 0; q < con.coeffs.size(); ++q)
      tmp.emplace_back(s.where[con.coeffs[q].block][con.coeffs[q].row].first,
                       static_cast<int>(q));
    std::stable_sort(tmp.begin(), tmp.end());
    for (std::size_t q = 0; q < tmp.size();) {
      int b = tmp[q].first;
      auto& bd = s.data.blocks[b];
      Part part{i, static_cast<int>(bd.r.size()), 0, {}, false};
      for (; q < tmp.size() && tmp[q].first == b; ++q) {
        const Entry& e = con.coeffs[tmp[q].second];
        if (e.value == 0.0) continue;
        int li = s.where[e.block][e.row].second, lj = s.where[e.block][e.col].second;
        bd.r.push_back(std::min(li, lj));
        bd.c.push_back(std::max(li, lj));
        bd.v.push_back(e.value);
      }
      part.end = static_cast<int>(bd.r.size());
      if (part.end > part.begin) bd.parts.push_back(std::move(part));
    }
  }
  // touched rows per part, local positions
  for (auto& bd : s.data.blocks) {
    bd.lr.resize(bd.r.size());
    bd.lc.resize(bd.r.size());
    std::vector<int> pos(bd.n, -1);
    for (auto& p : bd.parts) {
      for (int q = p.begin; q < p.end; ++q)
        for (int x : {bd.r[q], bd.c[q]})
          if (pos[x] < 0) {
            pos[x] = static_cast<int>(p.rows.size());
            p.rows.push_back(x);
          }
      for (int q = p.begin; q < p.end; ++q) {
        bd.lr[q] = pos[bd.r[q]];
        bd.lc[q] = pos[bd.c[q]];
      }
      for (int x : p.rows) pos[x] = -1;
      p.dense = 2 * static_cast<int>(p.rows.size()) > bd.n;
    }
  }
  return s;
}

// ---- linear maps ----

RealVector apply_A(const Internal& d, const Mats& Y) {
  RealVector out = RealVector::Zero(d.m);
  for (std::size_t k = 0; k < d.blocks.size(); ++k) {
    const auto& bd = d.blocks[k];
    const RealMatrix& y = Y[k];
    for (const auto& p : bd.parts) {
      double s = 0.0;
      for (int q = p.begin; q < p.end; ++q) {
        int r = bd.r[q], c = bd.c[q];
        s += bd.v[q] * (r == c ? y(r, r) : y(r, c) + y(c, r));
      }
      out(p.con) += s;
    }
  }
  return out;
}

Mats apply_At(const Internal& d, const RealVector& y) {
  Mats out;
  out.reserve(d.blocks.size());
  for (const auto& bd : d.blocks) {
    RealMatrix s = RealMatrix::Zero(bd.n, bd.n);
    for (const auto& p : bd.parts) {
      double w = y(p.con);
      for (int q = p.begin; q < p.end; ++q) {
        s(bd.r[q], bd.c[q]) += w * bd.v[q];
        if (bd.r[q] != bd.c[q]) s(bd.c[q], bd.r[q]) += w * bd.v[q];
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

double dot(const Mats& a, const Mats& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k].cwiseProduct(b[k]).sum();
  return s;
}

double fro(const Mats& a) {
  double s = 0.0;
  for (const auto& x : a) s += x.squaredNorm();
  return std::sqrt(s);
}

// Schur complement M_ij = tr(A_i X A_j Z^{-1}), upper triangle filled.
void schur(const Internal& d, const Mats& X, const Mats& Zi, RealMatrix& M) {
  M.setZero();
  for (std::size_t k = 0; k < d.blocks.size(); ++k) {
    const auto& bd = d.blocks[k];
    const RealMatrix& x = X[k];
    const RealMatrix& zi = Zi[k];
    RealMatrix G(bd.n, bd.n);
    for (std::size_t pi = 0; pi < bd.parts.size(); ++pi) {
      const Part& p = bd.parts[pi];
      if (p.dense) {
        RealMatrix a = RealMatrix::Zero(bd.n, bd.n);
        for (int q = p.begin; q < p.end; ++q) {
          a(bd.r[q], bd.c[q]) += bd.v[q];
          if (bd.r[q] != bd.c[q]) a(bd.c[q], bd.r[q]) += bd.v[q];
        }
        G.noalias() = x * (a * zi);
      } else {
        const int nr = static_cast<int>(p.rows.size());
        RealMatrix T = RealMatrix::Zero(nr, bd.n);
        for (int q = p.begin; q < p.end; ++q) {
          T.row(bd.lr[q]) += bd.v[q] * zi.row(bd.c[q]);
          if (bd.r[q] != bd.c[q]) T.row(bd.lc[q]) += bd.v[q] * zi.row(bd.r[q]);
        }
        RealMatrix xr(bd.n, nr);
        for (int t = 0; t < nr; ++t) xr.col(t) = x.col(p.rows[t]);
        G.noalias() = xr * T;
      }
      for (std::size_t pj = pi; pj < bd.parts.size(); ++pj) {
        const Part& o = bd.parts[pj];
        double s = 0.0;
        for (int q = o.begin; q < o.end; ++q) {
          int r = bd.r[q], c = bd.c[q];
          s += bd.v[q] * (r == c ? G(r, r) : G(r, c) + G(c, r));
        }
        int i = p.con, j = o.con;
        if (i <= j) M(i, j) += s; else M(j, i) += s;
      }
    }
  }
}

// Largest step in (0, inf] keeping L L^T + a*D positive semidefinite.
double max_step(const Eigen::LLT<RealMatrix>& L, const RealMatrix& D) {
  if (D.rows() == 0) return std::numeric_limits<double>::infinity();
  RealMatrix t = L.matrixL().solve(D);
  RealMatrix s = L.matrixL().solve(t.transpose());
  s = 0.5 * (s + s.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(s, Eigen::EigenvaluesOnly);
  double lmin = es.eigenvalues()(0);
  if (lmin >= 0.0) return std::numeric_limits<double>::infinity();
  return -1.0 / lmin;
}

bool factor_all(const Mats& A, std::vector<Eigen::LLT<RealMatrix>>& out) {
  out.resize(A.size());
  for (std::size_t k = 0; k < A.size(); ++k) {
    out[k].compute(A[k]);
    if (out[k].info() != Eigen::Success) return false;
  }
  return true;
}

struct Result {
  Mats X, Z;
  RealVector y;
  int iterations = 0;
  Status status = Status::NumericalFailure;
  std::string diagnostics;
};

Result ipm(const Internal& d, const Tolerances& tol) {
  const std::size_t nb = d.blocks.size();
  Result res;
  int ntot = 0;
  for (const auto& bd : d.blocks) ntot += bd.n;

  // initial point
  std::vector<double> normA(d.m, 0.0);
  Mats X(nb), Z(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    const auto& bd = d.blocks[k];
    std::vector<double> nrm;
    double xi_ratio = 0.0, maxA = 0.0;
    for (const auto& p : bd.parts) {
      double s = 0.0;
      for (int q = p.begin; q < p.end; ++q)
        s += (bd.r[q] == bd.c[q] ? 1.0 : 2.0) * bd.v[q] * bd.v[q];
      s = std::sqrt(s);
      xi_ratio = std::max(xi_ratio, (1.0 + std::abs(d.b(p.con))) / (1.0 + s));
      maxA = std::max(maxA, s);
    }
    const double n = bd.n;
    double xi = std::max({10.0, std::sqrt(n), n * xi_ratio});
    double eta = std::max({10.0, std::sqrt(n), maxA, bd.C.norm()});
    X[k] = xi * RealMatrix::Identity(bd.n, bd.n);
    Z[k] = eta * RealMatrix::Identity(bd.n, bd.n);
  }
  RealVector y = RealVector::Zero(d.m);
  Mats C(nb);
  for (std::size_t k = 0; k < nb; ++k) C[k] = d.blocks[k].C;
  const double normb = d.b.norm(), normC = fro(C);

  RealMatrix M(d.m, d.m);
  std::vector<Eigen::LLT<RealMatrix>> LX, LZ;
  Mats Zi(nb);
  int stall = 0;
  double best_merit = std::numeric_limits<double>::infinity();
  Result best;

  for (int it = 0;; ++it) {
    RealVector rp = d.b - apply_A(d, X);
    Mats Rd = apply_At(d, y);
    for (std::size_t k = 0; k < nb; ++k) Rd[k] -= Z[k] + C[k];
    const double pobj = dot(C, X), dobj = d.b.dot(y);
    const double relgap = std::abs(dobj - pobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    const double pinf = rp.norm() / (1.0 + normb);
    const double dinf = fro(Rd) / (1.0 + normC);
    const double mu = dot(X, Z) / std::max(ntot, 1);
    if (tol.verbose)
      std::fprintf(stderr, "%3d pobj %.10e dobj %.10e gap %.2e pinf %.2e dinf %.2e mu %.2e\n",
                   it, pobj, dobj, relgap, pinf, dinf, mu);
    res.iterations = it;
    double merit = std::max({relgap, pinf, dinf});
    if (merit < best_merit) {
      best_merit = merit;
      best.X = X; best.Z = Z; best.y = y; best.iterations = it;
    }
    if (relgap <= tol.gap && pinf <= tol.feasibility && dinf <= tol.feasibility) {
      res.status = Status::Optimal;
      break;
    }
    if (std::abs(pobj) > 1e12 || std::abs(dobj) > 1e12) {
      res.status = Status::Infeasible;
      res.diagnostics = "objective diverged: infeasible or unbounded program";
      break;
    }
    if (it >= tol.max_iterations || stall >= 4) {
      res.diagnostics = it >= tol.max_iterations ? "iteration limit" : "stalled steps";
      res.status = Status::NumericalFailure;
      break;
    }

    if (!factor_all(Z, LZ) || !factor_all(X, LX)) {
      res.diagnostics = "lost positive definiteness";
      break;
    }
    for (std::size_t k = 0; k < nb; ++k)
      Zi[k] = LZ[k].solve(RealMatrix::Identity(d.blocks[k].n, d.blocks[k].n));

    schur(d, X, Zi, M);
    Eigen::LLT<Eigen::Ref<RealMatrix>, Eigen::Upper> chol(M);
    if (chol.info() != Eigen::Success) {
      // regularize the diagonal and retry
      double scale = M.diagonal().cwiseAbs().maxCoeff();
      bool ok = false;
      for (double eps = 1e-14; eps <= 1e-6 && !ok; eps *= 100) {
        schur(d, X, Zi, M);
        M.diagonal().array() += eps * scale;
        chol.compute(M);
        ok = chol.info() == Eigen::Success;
      }
      if (!ok) {
        res.diagnostics = "Schur complement factorization failed";
        break;
      }
    }

    // X Rd Z^{-1}
    Mats XRZ(nb);
    for (std::size_t k = 0; k < nb; ++k) XRZ[k] = X[k] * Rd[k] * Zi[k];

    auto direction = [&](double sigma, const Mats* corr, RealVector& dy, Mats& dX, Mats& dZ) {
      Mats H(nb);
      for (std::size_t k = 0; k < nb; ++k) {
        H[k] = sigma * mu * Zi[k] - X[k] - XRZ[k];
        if (corr) H[k] -= (*corr)[k];
        H[k] = 0.5 * (H[k] + H[k].transpose()).eval();
      }
      dy = apply_A(d, H) - rp;
      chol.solveInPlace(dy);
      dZ = apply_At(d, dy);
      dX.resize(nb);
      for (std::size_t k = 0; k < nb; ++k) {
        dZ[k] += Rd[k];
        RealMatrix t = sigma * mu * Zi[k] - X[k] - X[k] * dZ[k] * Zi[k];
        if (corr) t -= (*corr)[k];
        dX[k] = 0.5 * (t + t.transpose());
      }
    };
    auto steps = [&](const Mats& dX, const Mats& dZ, double& ap, double& ad) {
      ap = ad = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < nb; ++k) {
        ap = std::min(ap, max_step(LX[k], dX[k]));
        ad = std::min(ad, max_step(LZ[k], dZ[k]));
      }
    };

    RealVector dy;
    Mats dX, dZ;
    direction(0.0, nullptr, dy, dX, dZ);
    double ap, ad;
    steps(dX, dZ, ap, ad);
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    double mu_aff = 0.0;
    for (std::size_t k = 0; k < nb; ++k)
      mu_aff += (X[k] + ap * dX[k]).cwiseProduct(Z[k] + ad * dZ[k]).sum();
    mu_aff /= std::max(ntot, 1);
    double expo = std::max(1.0, 3.0 * std::min(ap, ad) * std::min(ap, ad));
    double sigma = std::min(1.0, std::pow(std::max(mu_aff, 0.0) / mu, expo));

    Mats corr(nb);
    for (std::size_t k = 0; k < nb; ++k) corr[k] = dX[k] * dZ[k] * Zi[k];
    direction(sigma, &corr, dy, dX, dZ);
    steps(dX, dZ, ap, ad);
    double gamma = 0.9 + 0.09 * std::min({ap, ad, 1.0});
    ap = std::min(1.0, gamma * ap);
    ad = std::min(1.0, gamma * ad);
    stall = (std::max(ap, ad) < 1e-8) ? stall + 1 : 0;

    for (std::size_t k = 0; k < nb; ++k) {
      X[k] += ap * dX[k];
      Z[k] += ad * dZ[k];
    }
    y += ad * dy;
  }

  if (res.status == Status::Optimal || res.status == Status::Infeasible) {
    res.X = std::move(X);
    res.Z = std::move(Z);
    res.y = std::move(y);
  } else {
    res.X = std::move(best.X);
    res.Z = std::move(best.Z);
    res.y = std::move(best.y);
    res.diagnostics += "; best iterate from step " + std::to_string(best.iterations);
    if (best_merit <= 1e-5) res.status = Status::NearOptimal;
  }
  return res;
}

}  // namespace

std::string to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::NearOptimal: return "near-optimal";
    case Status::Infeasible: return "infeasible";
    case Status::NumericalFailure: return "numerical-failure";
  }
  return "unknown";
}

SdpSolution solve(const SdpProblem& problem, const Tolerances& tol) {
  auto t0 = std::chrono::steady_clock::now();
  problem.check();
  SdpProblem real = problem.is_real() ? problem : embed_complex(problem);

  SdpSolution sol;
  std::vector<int> row_of;
  try {
    row_of = kept_constraint_rows(real);
  } catch (const std::invalid_argument& e) {
    sol.status = Status::Infeasible;
    sol.diagnostics = e.what();
    return sol;
  }
  SdpProblem work;
  work.blocks = real.blocks;
  work.objective = real.objective;
  for (int i : row_of) work.constraints.push_back(real.constraints[i]);

  Split split = build_internal(work);
  Result r = ipm(split.data, tol);

  // reassemble into the (embedded) block layout
  const std::size_t nb = real.blocks.size();
  sol.X.resize(nb);
  sol.Z.resize(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    const int n = real.blocks[k].size;
    sol.X[k] = RealMatrix::Zero(n, n);
    sol.Z[k] = RealMatrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        auto [bi, li] = split.where[k][i];
        auto [bj, lj] = split.where[k][j];
        if (bi < 0 || bi != bj || r.X.empty()) continue;
        sol.X[k](i, j) = r.X[bi](li, lj);
        sol.Z[k](i, j) = r.Z[bi](li, lj);
      }
  }
  sol.y = RealVector::Zero(static_cast<Eigen::Index>(real.constraints.size()));
  if (r.y.size() > 0)
    for (std::size_t w = 0; w < row_of.size(); ++w) sol.y(row_of[w]) = r.y(w);
  sol.iterations = r.iterations;
  sol.status = r.status;
  sol.diagnostics = r.diagnostics;

  // report everything from an independent recomputation
  ValidationReport rep = validate_solution(real, sol, tol.feasibility);
  sol.primal_objective = inner(real.objective, sol.X);
  sol.dual_objective = 0.0;
  for (std::size_t i = 0; i < real.constraints.size(); ++i)
    sol.dual_objective += real.constraints[i].rhs * sol.y(static_cast<Eigen::Index>(i));
  sol.gap = sol.dual_objective - sol.primal_objective;
  sol.relative_gap = std::abs(sol.gap) /
                     (1.0 + std::abs(sol.primal_objective) + std::abs(sol.dual_objective));
  sol.primal_residual = rep.primal_residual;
  sol.dual_residual = rep.dual_residual;
  sol.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

}  // namespace dimbound::sdp
