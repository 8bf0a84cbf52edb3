#pragma once

// Small dense helpers shared by the geometric layers: pivoted solves that work
// for any scalar (plain or dual), and orthonormal kernel/range bases.

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "dirac/autodiff.hpp"
#include "dirac/errors.hpp"

namespace dirac {

/// Row-major dense matrix of arbitrary scalar.
template <class S>
struct SmallMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<S> data;

  SmallMatrix() = default;
  SmallMatrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r * c), S(0.0)) {}
  S& operator()(int i, int j) { return data[static_cast<std::size_t>(i * cols + j)]; }
  const S& operator()(int i, int j) const { return data[static_cast<std::size_t>(i * cols + j)]; }
};

/// Solves A X = B by Gaussian elimination with partial pivoting on primal
/// values. Returns false when a pivot falls below `tiny` (relative).
template <class S>
bool solve_in_place(SmallMatrix<S> A, SmallMatrix<S>& B, double tiny = 1e-14) {
  const int n = A.rows;
  if (A.cols != n || B.rows != n) throw ShapeError("solve: dimension mismatch");
  double scale = 0.0;
  for (const auto& a : A.data) scale = std::max(scale, std::abs(primal(a)));
  if (scale == 0.0) return n == 0;
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(primal(A(r, col))) > std::abs(primal(A(piv, col)))) piv = r;
    }
    if (std::abs(primal(A(piv, col))) <= tiny * scale) return false;
    if (piv != col) {
      for (int j = 0; j < n; ++j) std::swap(A(col, j), A(piv, j));
      for (int j = 0; j < B.cols; ++j) std::swap(B(col, j), B(piv, j));
    }
    const S inv = S(1.0) / A(col, col);
    for (int r = col + 1; r < n; ++r) {
      const S f = A(r, col) * inv;
      if (primal(f) == 0.0 && !is_dual_v<S>) continue;
      for (int j = col; j < n; ++j) A(r, j) -= f * A(col, j);
      for (int j = 0; j < B.cols; ++j) B(r, j) -= f * B(col, j);
    }
  }
  for (int col = n - 1; col >= 0; --col) {
    const S inv = S(1.0) / A(col, col);
    for (int j = 0; j < B.cols; ++j) {
      S acc = B(col, j);
      for (int c = col + 1; c < n; ++c) acc -= A(col, c) * B(c, j);
      B(col, j) = acc * inv;
    }
  }
  return true;
}

/// Solves A x = b for a single right-hand side.
template <class S>
bool solve_vector(const SmallMatrix<S>& A, std::vector<S>& b, double tiny = 1e-14) {
  SmallMatrix<S> B(static_cast<int>(b.size()), 1);
  B.data = b;
  if (!solve_in_place(A, B, tiny)) return false;
  b = B.data;
  return true;
}

inline Eigen::MatrixXd to_eigen(const SmallMatrix<double>& m) {
  Eigen::MatrixXd out(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < m.cols; ++j) out(i, j) = m(i, j);
  }
  return out;
}

/// Smallest singular value (0 for an empty matrix).
inline double min_singular_value(const Eigen::MatrixXd& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (m.rows() < m.cols()) return s.size() < m.rows() ? 0.0 : s[s.size() - 1];
  return s[s.size() - 1];
}

/// Orthonormal basis of ker(W) for a k x n matrix W of full row rank, and an
/// orthonormal basis of its row space. Pivoting is deterministic.
struct KernelSplit {
  Eigen::MatrixXd kernel;  ///< n x (n-k)
  Eigen::MatrixXd range;   ///< n x k, spans the rows of W
};

inline KernelSplit kernel_split(const Eigen::MatrixXd& W, double rank_tol = 1e-10) {
  const Eigen::Index k = W.rows();
  const Eigen::Index n = W.cols();
  KernelSplit out;
  if (k == 0) {
    out.kernel = Eigen::MatrixXd::Identity(n, n);
    out.range.resize(n, 0);
    return out;
  }
  if (k > n) throw ShapeError("more constraint rows than coordinates");
  const double smin = min_singular_value(W);
  if (!(smin > rank_tol)) {
    throw RankError("constraint matrix lost rank (smallest singular value " + std::to_string(smin) + ")");
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(W.transpose());
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  out.range = Q.leftCols(k);
  out.kernel = Q.rightCols(n - k);
  return out;
}

/// Orthonormal basis of the numerical null space of a symmetric matrix.
inline Eigen::MatrixXd symmetric_null_space(const Eigen::MatrixXd& A, double tol) {
  if (A.rows() == 0) return Eigen::MatrixXd(0, 0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  const auto& ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (std::abs(ev[i]) <= tol * scale) idx.push_back(i);
  }
  Eigen::MatrixXd out(A.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = es.eigenvectors().col(idx[j]);
  return out;
}

}  // namespace dirac
