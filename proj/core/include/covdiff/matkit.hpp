#pragma once

#include <complex>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace covdiff {

using cxd = std::complex<double>;

/// Raised when an iterative numerical routine fails to converge or produces
/// non-finite values.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense complex matrix, row-major. Carrier of received-signal blocks,
/// channel matrices, and (Hermitian) covariance matrices.
class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  ComplexMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), entries_(rows * cols) {}
  ComplexMatrix(std::initializer_list<std::initializer_list<cxd>> init);

  static ComplexMatrix identity(std::size_t n);
  static ComplexMatrix diagonal(const std::vector<double>& d);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  cxd& operator()(std::size_t i, std::size_t j) { return entries_[i * cols_ + j]; }
  const cxd& operator()(std::size_t i, std::size_t j) const {
    return entries_[i * cols_ + j];
  }

  const std::vector<cxd>& entries() const { return entries_; }
  std::vector<cxd>& entries() { return entries_; }

  /// Conjugate transpose.
  ComplexMatrix adjoint() const;
  cxd trace() const;

  /// Per-entry check of A[i][j] == conj(A[j][i]) within absolute tolerance.
  bool is_hermitian(double tol = 1e-10) const;

  ComplexMatrix& operator+=(const ComplexMatrix& rhs);
  ComplexMatrix& operator-=(const ComplexMatrix& rhs);
  ComplexMatrix& operator*=(cxd scalar);

  friend ComplexMatrix operator+(ComplexMatrix lhs, const ComplexMatrix& rhs) {
    lhs += rhs;
    return lhs;
  }
  friend ComplexMatrix operator-(ComplexMatrix lhs, const ComplexMatrix& rhs) {
    lhs -= rhs;
    return lhs;
  }
  friend ComplexMatrix operator*(ComplexMatrix lhs, cxd scalar) {
    lhs *= scalar;
    return lhs;
  }
  friend ComplexMatrix operator*(cxd scalar, ComplexMatrix rhs) {
    rhs *= scalar;
    return rhs;
  }
  friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cxd> entries_;
};

/// Eigendecomposition of a Hermitian matrix: real eigenvalues sorted
/// descending (stable tie-break by original index) and the matching unitary
/// eigenvector columns.
struct EigenResult {
  std::vector<double> eigenvalues;
  ComplexMatrix eigenvectors;
};

/// Sample covariance matrix (1/L) * Y * Y^H of an n_rx x L observation
/// block. Hermitian positive semidefinite by construction.
ComplexMatrix scm(const ComplexMatrix& y, std::size_t n_samples);

/// Cyclic-Jacobi eigendecomposition for Hermitian matrices. The input is
/// validated Hermitian (1e-10 per entry) and symmetrized to (A+A^H)/2
/// before iterating, which guarantees real eigenvalues. Throws NumericError
/// after 100 sweeps without convergence.
EigenResult hermitian_eig(const ComplexMatrix& a);

/// Singular values of a Hermitian matrix: |eigenvalues|, sorted descending.
/// Coincides with the eigenvalue spectrum for PSD input; exact for the
/// indefinite covariance-difference matrices this project works with.
std::vector<double> singular_values_hermitian(const ComplexMatrix& a);

double frobenius_norm(const ComplexMatrix& a);

/// Spectral norm of a Hermitian matrix (largest |eigenvalue|).
double spectral_norm_hermitian(const ComplexMatrix& a);

}  // namespace covdiff
