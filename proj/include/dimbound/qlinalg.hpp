#pragma once

// Dense Hermitian linear algebra over multipartite tensor spaces.
//
// Subsystems are indexed from 0 and laid out in Kronecker (row-major) order:
// the last factor varies fastest in the flat index.

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace dimbound::qlinalg {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

class LinalgError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical tolerances shared by every module.
struct Settings {
  double hermiticity_tol = 1e-12;
  double eigen_residual_tol = 1e-10;
};

const Settings& default_settings();

class SubsystemShape {
 public:
  SubsystemShape() = default;
  explicit SubsystemShape(std::vector<int> dims);

  std::size_t size() const { return dims_.size(); }
  int dim(std::size_t i) const { return dims_.at(i); }
  const std::vector<int>& dims() const { return dims_; }
  Eigen::Index total() const { return total_; }

  SubsystemShape concat(const SubsystemShape& other) const;
  SubsystemShape select(std::span<const int> indices) const;

  bool operator==(const SubsystemShape&) const = default;

 private:
  std::vector<int> dims_;
  Eigen::Index total_ = 1;
};

class HermitianOperator {
 public:
  HermitianOperator() = default;
  // Throws LinalgError if the matrix does not match the shape or is not
  // Hermitian to within the tolerance.
  HermitianOperator(SubsystemShape shape, Matrix entries,
                    double tol = default_settings().hermiticity_tol);

  static HermitianOperator identity(const SubsystemShape& shape);
  static HermitianOperator projector(const SubsystemShape& shape,
                                     const Vector& v);
  static HermitianOperator from_real(SubsystemShape shape,
                                     const RealMatrix& entries);

  const SubsystemShape& shape() const { return shape_; }
  const Matrix& matrix() const { return entries_; }
  Eigen::Index dim() const { return entries_.rows(); }
  double trace() const { return entries_.trace().real(); }

 private:
  SubsystemShape shape_;
  Matrix entries_;
};

HermitianOperator kron(std::span<const HermitianOperator> ops);
HermitianOperator kron(const HermitianOperator& a, const HermitianOperator& b);

// Kronecker product of plain matrices in list order.
Matrix kron_matrices(std::span<const Matrix> ms);
RealMatrix kron_real(const RealMatrix& a, const RealMatrix& b);

HermitianOperator partial_trace(const HermitianOperator& op,
                                std::span<const int> keep);
HermitianOperator partial_transpose(const HermitianOperator& op,
                                    std::span<const int> part);

// Raw-matrix versions used by the relaxation compilers.
Matrix partial_trace(const Matrix& m, const std::vector<int>& dims,
                     std::span<const int> keep);
Matrix partial_transpose(const Matrix& m, const std::vector<int>& dims,
                         std::span<const int> part);

// Flat (row, col) -> (row, col) index map of the partial transpose over
// `part`. Both the forward and inverse maps are this same involution.
std::pair<Eigen::Index, Eigen::Index> partial_transpose_index(
    const std::vector<int>& dims, std::span<const int> part, Eigen::Index row,
    Eigen::Index col);

HermitianOperator swap_operator(const SubsystemShape& shape, int i, int j);
RealMatrix swap_matrix(const std::vector<int>& dims, int i, int j);

// Occupation-number tuples of N bosons in d modes, lexicographic order.
std::vector<std::vector<int>> occupation_basis(int d, int copies);

// Columns: orthonormal basis of the symmetric subspace of (C^d)^{(x)N},
// one column per occupation tuple (see occupation_basis).
RealMatrix sym_isometry(int d, int copies);

long long binomial(int n, int k);

struct Eigensystem {
  RealVector values;  // descending
  Matrix vectors;     // columns, matching values
};

Eigensystem herm_eig(const HermitianOperator& op,
                     const Settings& settings = default_settings());
Eigensystem herm_eig(const Matrix& m,
                     const Settings& settings = default_settings());

double min_eigenvalue(const RealMatrix& m);
double trace_norm(const Matrix& m);

}  // namespace dimbound::qlinalg
