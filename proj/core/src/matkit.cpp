#include "covdiff/matkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace covdiff {

ComplexMatrix::ComplexMatrix(std::initializer_list<std::initializer_list<cxd>> init) {
  rows_ = init.size();
  cols_ = rows_ == 0 ? 0 : init.begin()->size();
  entries_.reserve(rows_ * cols_);
  for (const auto& row : init) {
    if (row.size() != cols_)
      throw std::invalid_argument("ComplexMatrix: ragged initializer list");
    entries_.insert(entries_.end(), row.begin(), row.end());
  }
}

ComplexMatrix ComplexMatrix::identity(std::size_t n) {
  ComplexMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

ComplexMatrix ComplexMatrix::diagonal(const std::vector<double>& d) {
  ComplexMatrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

ComplexMatrix ComplexMatrix::adjoint() const {
  ComplexMatrix out(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) out(j, i) = std::conj((*this)(i, j));
  return out;
}

cxd ComplexMatrix::trace() const {
  if (rows_ != cols_) throw std::invalid_argument("trace: matrix not square");
  cxd t = 0.0;
  for (std::size_t i = 0; i < rows_; ++i) t += (*this)(i, i);
  return t;
}

bool ComplexMatrix::is_hermitian(double tol) const {
  if (rows_ != cols_) return false;
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = i; j < cols_; ++j)
      if (std::abs((*this)(i, j) - std::conj((*this)(j, i))) > tol) return false;
  return true;
}

ComplexMatrix& ComplexMatrix::operator+=(const ComplexMatrix& rhs) {
  if (rows_ != rhs.rows_ || cols_ != rhs.cols_)
    throw std::invalid_argument("matrix addition: dimension mismatch");
  for (std::size_t k = 0; k < entries_.size(); ++k) entries_[k] += rhs.entries_[k];
  return *this;
}

ComplexMatrix& ComplexMatrix::operator-=(const ComplexMatrix& rhs) {
  if (rows_ != rhs.rows_ || cols_ != rhs.cols_)
    throw std::invalid_argument("matrix subtraction: dimension mismatch");
  for (std::size_t k = 0; k < entries_.size(); ++k) entries_[k] -= rhs.entries_[k];
  return *this;
}

ComplexMatrix& ComplexMatrix::operator*=(cxd scalar) {
  for (auto& e : entries_) e *= scalar;
  return *this;
}

ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("matrix product: dimension mismatch");
  ComplexMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const cxd aik = a(i, k);
      if (aik == cxd{}) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

ComplexMatrix scm(const ComplexMatrix& y, std::size_t n_samples) {
  if (n_samples < 1) throw std::invalid_argument("scm: sample count must be >= 1");
  if (y.cols() != n_samples)
    throw std::invalid_argument("scm: observation block has wrong column count");
  const std::size_t n = y.rows();
  ComplexMatrix r(n, n);
  // Accumulate the lower triangle of Y*Y^H, then mirror.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      cxd acc = 0.0;
      for (std::size_t l = 0; l < n_samples; ++l) acc += y(i, l) * std::conj(y(j, l));
      r(i, j) = acc / static_cast<double>(n_samples);
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) r(i, j) = std::conj(r(j, i));
  // Diagonal of Y*Y^H is real by construction; drop rounding residue.
  for (std::size_t i = 0; i < n; ++i) r(i, i) = cxd(r(i, i).real(), 0.0);
  return r;
}

namespace {

double off_diagonal_norm(const ComplexMatrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) s += std::norm(a(i, j));
  return std::sqrt(s);
}

// One complex Jacobi rotation zeroing A(p,q). The 2x2 Hermitian subproblem
// [[app, b],[conj(b), aqq]] with b = r*e^{i phi} is reduced to the real
// symmetric case by the phase diag(1, e^{-i phi}), then rotated with the
// classic (c, s) choice that picks the smaller rotation angle.
void jacobi_rotate(ComplexMatrix& a, ComplexMatrix& v, std::size_t p, std::size_t q) {
  const cxd apq = a(p, q);
  const double r = std::abs(apq);
  if (r == 0.0) return;

  const cxd phase = apq / r;  // e^{i phi}
  const double app = a(p, p).real();
  const double aqq = a(q, q).real();
  const double tau = (aqq - app) / (2.0 * r);
  const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
  const double c = 1.0 / std::sqrt(1.0 + t * t);
  const double s = t * c;

  // Unitary U: U(p,p)=c, U(p,q)=s, U(q,p)=-s*conj(phase), U(q,q)=c*conj(phase).
  const cxd uqp = -s * std::conj(phase);
  const cxd uqq = c * std::conj(phase);

  const std::size_t n = a.rows();
  for (std::size_t i = 0; i < n; ++i) {
    if (i == p || i == q) continue;
    const cxd aip = a(i, p);
    const cxd aiq = a(i, q);
    a(i, p) = c * aip + uqp * aiq;
    a(i, q) = s * aip + uqq * aiq;
    a(p, i) = std::conj(a(i, p));
    a(q, i) = std::conj(a(i, q));
  }
  a(p, p) = app - t * r;
  a(q, q) = aqq + t * r;
  a(p, q) = 0.0;
  a(q, p) = 0.0;

  for (std::size_t i = 0; i < n; ++i) {
    const cxd vip = v(i, p);
    const cxd viq = v(i, q);
    v(i, p) = c * vip + uqp * viq;
    v(i, q) = s * vip + uqq * viq;
  }
}

}  // namespace

EigenResult hermitian_eig(const ComplexMatrix& a) {
  if (a.rows() != a.cols())
    throw std::invalid_argument("hermitian_eig: matrix not square");
  if (!a.is_hermitian(1e-10))
    throw std::invalid_argument("hermitian_eig: matrix not Hermitian within 1e-10");

  const std::size_t n = a.rows();
  // Symmetrize to absorb floating-point asymmetry accumulated upstream.
  ComplexMatrix work(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      work(i, j) = 0.5 * (a(i, j) + std::conj(a(j, i)));

  ComplexMatrix v = ComplexMatrix::identity(n);
  const double scale = std::max(frobenius_norm(work), 1.0);
  constexpr int kMaxSweeps = 100;

  bool converged = n < 2;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q)
        if (std::abs(work(p, q)) > 1e-15 * scale) jacobi_rotate(work, v, p, q);
    converged = off_diagonal_norm(work) <= 1e-13 * scale;
  }
  if (!converged)
    throw NumericError("hermitian_eig: Jacobi iteration did not converge in 100 sweeps");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return work(i, i).real() > work(j, j).real();
  });

  EigenResult res;
  res.eigenvalues.resize(n);
  res.eigenvectors = ComplexMatrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    res.eigenvalues[k] = work(order[k], order[k]).real();
    for (std::size_t i = 0; i < n; ++i) res.eigenvectors(i, k) = v(i, order[k]);
  }
  return res;
}

std::vector<double> singular_values_hermitian(const ComplexMatrix& a) {
  auto eig = hermitian_eig(a);
  std::vector<double> sv(eig.eigenvalues.size());
  for (std::size_t i = 0; i < sv.size(); ++i) sv[i] = std::abs(eig.eigenvalues[i]);
  std::sort(sv.begin(), sv.end(), std::greater<double>());
  return sv;
}

double frobenius_norm(const ComplexMatrix& a) {
  double s = 0.0;
  for (const auto& e : a.entries()) s += std::norm(e);
  return std::sqrt(s);
}

double spectral_norm_hermitian(const ComplexMatrix& a) {
  auto sv = singular_values_hermitian(a);
  return sv.empty() ? 0.0 : sv.front();
}

}  // namespace covdiff
