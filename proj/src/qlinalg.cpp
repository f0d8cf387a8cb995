#include "dimbound/qlinalg.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <string>

namespace dimbound::qlinalg {

const Settings& default_settings() {
  static const Settings s{};
  return s;
}

SubsystemShape::SubsystemShape(std::vector<int> dims) : dims_(std::move(dims)) {
  for (int d : dims_) {
    if (d < 1) throw LinalgError("local dimension must be >= 1");
    total_ *= d;
  }
}

SubsystemShape SubsystemShape::concat(const SubsystemShape& other) const {
  std::vector<int> d = dims_;
  d.insert(d.end(), other.dims_.begin(), other.dims_.end());
  return SubsystemShape(std::move(d));
}

SubsystemShape SubsystemShape::select(std::span<const int> indices) const {
  std::vector<int> d;
  for (int i : indices) {
    if (i < 0 || i >= static_cast<int>(dims_.size()))
      throw LinalgError("subsystem index out of range");
    d.push_back(dims_[i]);
  }
  return SubsystemShape(std::move(d));
}

HermitianOperator::HermitianOperator(SubsystemShape shape, Matrix entries,
                                     double tol)
    : shape_(std::move(shape)), entries_(std::move(entries)) {
  if (entries_.rows() != shape_.total() || entries_.cols() != shape_.total())
    throw LinalgError("operator size does not match its shape");
  double dev = (entries_ - entries_.adjoint()).cwiseAbs().maxCoeff();
  if (entries_.size() > 0 && dev > tol)
    throw LinalgError("operator is not Hermitian (deviation " +
                      std::to_string(dev) + ")");
}

HermitianOperator HermitianOperator::identity(const SubsystemShape& shape) {
  return HermitianOperator(shape, Matrix::Identity(shape.total(), shape.total()));
}

HermitianOperator HermitianOperator::projector(const SubsystemShape& shape,
                                               const Vector& v) {
  Matrix p = v * v.adjoint();
  p = 0.5 * (p + p.adjoint()).eval();
  return HermitianOperator(shape, std::move(p));
}

HermitianOperator HermitianOperator::from_real(SubsystemShape shape,
                                               const RealMatrix& entries) {
  return HermitianOperator(std::move(shape), entries.cast<Complex>());
}

// ---- Kronecker products ----

Matrix kron_matrices(std::span<const Matrix> ms) {
  if (ms.empty()) throw LinalgError("kron of an empty list");
  Matrix out = ms[0];
  for (std::size_t k = 1; k < ms.size(); ++k) {
    const Matrix& b = ms[k];
    Matrix next(out.rows() * b.rows(), out.cols() * b.cols());
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      for (Eigen::Index j = 0; j < out.cols(); ++j)
        next.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = out(i, j) * b;
    out = std::move(next);
  }
  return out;
}

RealMatrix kron_real(const RealMatrix& a, const RealMatrix& b) {
  RealMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

HermitianOperator kron(std::span<const HermitianOperator> ops) {
  if (ops.empty()) throw LinalgError("kron of an empty list");
  std::vector<Matrix> ms;
  SubsystemShape shape = ops[0].shape();
  ms.push_back(ops[0].matrix());
  for (std::size_t k = 1; k < ops.size(); ++k) {
    shape = shape.concat(ops[k].shape());
    ms.push_back(ops[k].matrix());
  }
  return HermitianOperator(shape, kron_matrices(ms), 1e-9);
}

HermitianOperator kron(const HermitianOperator& a, const HermitianOperator& b) {
  const HermitianOperator both[] = {a, b};
  return kron(std::span<const HermitianOperator>(both));
}

// ---- index helpers ----

namespace {

std::vector<Eigen::Index> strides_of(const std::vector<int>& dims) {
  std::vector<Eigen::Index> s(dims.size(), 1);
  for (int k = static_cast<int>(dims.size()) - 2; k >= 0; --k)
    s[k] = s[k + 1] * dims[k + 1];
  return s;
}

std::vector<bool> mask_of(std::size_t n, std::span<const int> idx) {
  std::vector<bool> m(n, false);
  for (int i : idx) {
    if (i < 0 || i >= static_cast<int>(n))
      throw LinalgError("subsystem index out of range");
    m[i] = true;
  }
  return m;
}

// Flat indices of all multi-indices over the subsystems in `which`, with the
// other digits zero, in Kronecker order of `which`.
std::vector<Eigen::Index> offsets(const std::vector<int>& dims,
                                  const std::vector<int>& which) {
  auto st = strides_of(dims);
  std::vector<Eigen::Index> out{0};
  for (int w : which) {
    std::vector<Eigen::Index> next;
    next.reserve(out.size() * dims[w]);
    for (Eigen::Index o : out)
      for (int v = 0; v < dims[w]; ++v) next.push_back(o + v * st[w]);
    out = std::move(next);
  }
  return out;
}

Eigen::Index product(const std::vector<int>& dims) {
  Eigen::Index p = 1;
  for (int d : dims) p *= d;
  return p;
}

}  // namespace

Matrix partial_trace(const Matrix& m, const std::vector<int>& dims,
                     std::span<const int> keep) {
  if (m.rows() != product(dims) || m.cols() != m.rows())
    throw LinalgError("matrix does not match subsystem dims");
  auto mask = mask_of(dims.size(), keep);
  std::vector<int> kept(keep.begin(), keep.end());
  std::vector<int> traced;
  for (std::size_t i = 0; i < dims.size(); ++i)
    if (!mask[i]) traced.push_back(static_cast<int>(i));
  auto ko = offsets(dims, kept);
  auto to = offsets(dims, traced);
  const auto n = static_cast<Eigen::Index>(ko.size());
  Matrix out = Matrix::Zero(n, n);
  for (Eigen::Index t : to)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i) out(i, j) += m(ko[i] + t, ko[j] + t);
  return out;
}

std::pair<Eigen::Index, Eigen::Index> partial_transpose_index(
    const std::vector<int>& dims, std::span<const int> part, Eigen::Index row,
    Eigen::Index col) {
  auto st = strides_of(dims);
  for (int p : part) {
    Eigen::Index dr = (row / st[p]) % dims[p];
    Eigen::Index dc = (col / st[p]) % dims[p];
    row += (dc - dr) * st[p];
    col += (dr - dc) * st[p];
  }
  return {row, col};
}

Matrix partial_transpose(const Matrix& m, const std::vector<int>& dims,
                         std::span<const int> part) {
  if (m.rows() != product(dims) || m.cols() != m.rows())
    throw LinalgError("matrix does not match subsystem dims");
  mask_of(dims.size(), part);
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      auto [r2, c2] = partial_transpose_index(dims, part, r, c);
      out(r2, c2) = m(r, c);
    }
  return out;
}

HermitianOperator partial_trace(const HermitianOperator& op,
                                std::span<const int> keep) {
  Matrix r = partial_trace(op.matrix(), op.shape().dims(), keep);
  return HermitianOperator(op.shape().select(keep), std::move(r), 1e-9);
}

HermitianOperator partial_transpose(const HermitianOperator& op,
                                    std::span<const int> part) {
  return HermitianOperator(op.shape(),
                           partial_transpose(op.matrix(), op.shape().dims(), part));
}

// ---- swaps and symmetric subspaces ----

RealMatrix swap_matrix(const std::vector<int>& dims, int i, int j) {
  const int n = static_cast<int>(dims.size());
  if (i < 0 || j < 0 || i >= n || j >= n)
    throw LinalgError("subsystem index out of range");
  if (dims[i] != dims[j]) throw LinalgError("swap of unequal local dimensions");
  auto st = strides_of(dims);
  const Eigen::Index total = product(dims);
  RealMatrix v = RealMatrix::Zero(total, total);
  for (Eigen::Index c = 0; c < total; ++c) {
    Eigen::Index di = (c / st[i]) % dims[i];
    Eigen::Index dj = (c / st[j]) % dims[j];
    Eigen::Index r = c + (dj - di) * st[i] + (di - dj) * st[j];
    v(r, c) = 1.0;
  }
  return v;
}

HermitianOperator swap_operator(const SubsystemShape& shape, int i, int j) {
  return HermitianOperator::from_real(shape, swap_matrix(shape.dims(), i, j));
}

long long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

std::vector<std::vector<int>> occupation_basis(int d, int copies) {
  if (d < 1 || copies < 0) throw LinalgError("invalid symmetric-space parameters");
  std::vector<std::vector<int>> out;
  std::vector<int> occ(d, 0);
  // Recursive fill in lexicographic order of the occupation tuple.
  auto rec = [&](auto&& self, int pos, int left) -> void {
    if (pos == d - 1) {
      occ[pos] = left;
      out.push_back(occ);
      return;
    }
    for (int k = 0; k <= left; ++k) {
      occ[pos] = k;
      self(self, pos + 1, left - k);
    }
  };
  rec(rec, 0, copies);
  return out;
}

RealMatrix sym_isometry(int d, int copies) {
  if (d < 1 || copies < 1) throw LinalgError("invalid symmetric-space parameters");
  auto basis = occupation_basis(d, copies);
  std::map<std::vector<int>, Eigen::Index> column;
  for (std::size_t k = 0; k < basis.size(); ++k)
    column[basis[k]] = static_cast<Eigen::Index>(k);

  Eigen::Index total = 1;
  for (int c = 0; c < copies; ++c) total *= d;
  RealMatrix e = RealMatrix::Zero(total, static_cast<Eigen::Index>(basis.size()));
  std::vector<int> occ(d);
  for (Eigen::Index flat = 0; flat < total; ++flat) {
    std::fill(occ.begin(), occ.end(), 0);
    Eigen::Index f = flat;
    for (int c = 0; c < copies; ++c) {
      ++occ[f % d];
      f /= d;
    }
    e(flat, column.at(occ)) = 1.0;
  }
  for (Eigen::Index k = 0; k < e.cols(); ++k) e.col(k).normalize();
  return e;
}

// ---- spectra ----

Eigensystem herm_eig(const Matrix& m, const Settings& settings) {
  if (m.rows() != m.cols()) throw LinalgError("herm_eig needs a square matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  if (es.info() != Eigen::Success)
    throw LinalgError("Hermitian eigensolver failed to converge");
  const Eigen::Index n = m.rows();
  Eigensystem out;
  out.values = es.eigenvalues().reverse();
  out.vectors = es.eigenvectors().rowwise().reverse();
  if (n > 0) {
    double norm = m.norm();
    double resid = (m - out.vectors * out.values.cast<Complex>().asDiagonal() *
                            out.vectors.adjoint())
                       .norm();
    if (resid > settings.eigen_residual_tol * std::max(norm, 1e-300) &&
        resid > 1e-14)
      throw LinalgError("eigendecomposition residual " + std::to_string(resid) +
                        " above tolerance");
  }
  return out;
}

Eigensystem herm_eig(const HermitianOperator& op, const Settings& settings) {
  return herm_eig(op.matrix(), settings);
}

double min_eigenvalue(const RealMatrix& m) {
  if (m.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double trace_norm(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.adjoint()),
                                           Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().sum();
}

}  // namespace dimbound::qlinalg
