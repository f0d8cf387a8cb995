#pragma once

// Index helpers shared by the relaxation compilers.

#include <vector>

#include <Eigen/Dense>

namespace dimbound::relax::detail {

inline long long product(const std::vector<int>& dims) {
  long long t = 1;
  for (int d : dims) t *= d;
  return t;
}

// Mixed-radix digits, last factor fastest.
inline void digits(long long idx, const std::vector<int>& dims, std::vector<int>& out) {
  out.resize(dims.size());
  for (int f = static_cast<int>(dims.size()) - 1; f >= 0; --f) {
    out[f] = static_cast<int>(idx % dims[f]);
    idx /= dims[f];
  }
}

inline long long compose(const std::vector<int>& dg, const std::vector<int>& dims) {
  long long idx = 0;
  for (std::size_t f = 0; f < dims.size(); ++f) idx = idx * dims[f] + dg[f];
  return idx;
}

// Operator acting on the factors `positions` (in that order) embedded into
// the full product space with identities elsewhere.
inline Eigen::MatrixXd embed(const Eigen::MatrixXd& local, const std::vector<int>& dims,
                             const std::vector<int>& positions) {
  const long long total = product(dims);
  std::vector<int> sub;
  for (int p : positions) sub.push_back(dims[p]);
  std::vector<char> inside(dims.size(), 0);
  for (int p : positions) inside[p] = 1;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(total, total);
  std::vector<int> dr, dc, lr(positions.size()), lc(positions.size());
  for (long long r = 0; r < total; ++r) {
    digits(r, dims, dr);
    for (long long c = 0; c < total; ++c) {
      digits(c, dims, dc);
      bool same = true;
      for (std::size_t f = 0; f < dims.size() && same; ++f)
        if (!inside[f] && dr[f] != dc[f]) same = false;
      if (!same) continue;
      for (std::size_t k = 0; k < positions.size(); ++k) {
        lr[k] = dr[positions[k]];
        lc[k] = dc[positions[k]];
      }
      out(r, c) = local(compose(lr, sub), compose(lc, sub));
    }
  }
  return out;
}

}  // namespace dimbound::relax::detail
