#pragma once

// Shared dense linear algebra helpers: norms, orthonormal bases, principal
// angles, deterministic phase conventions.

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace specmult {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

// ---------- norms ----------

// Spectral norm via SVD; desk-scale matrices only.
inline double op_norm(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  return m.jacobiSvd().singularValues()(0);
}

inline double op_norm_herm(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// ---------- hermitian structure ----------

inline bool is_exactly_hermitian(const CMatrix& m) {
  if (m.rows() != m.cols()) return false;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j <= i; ++j)
      if (m(i, j) != std::conj(m(j, i))) return false;
  return true;
}

inline CMatrix herm_part(const CMatrix& m) { return 0.5 * (m + m.adjoint()); }
inline CMatrix antiherm_part(const CMatrix& m) {
  return (m - m.adjoint()) / Complex(0.0, 2.0);  // "imaginary part" of an operator
}

// ---------- deterministic phases ----------

// Rotate a column so its first component above a relative threshold is real
// and positive. Keeps eigenvector output reproducible.
inline void fix_phase(Eigen::Ref<CVector> v, double rel_tol = 1e-12) {
  const double scale = v.cwiseAbs().maxCoeff();
  if (scale == 0.0) return;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v(i));
    if (a > rel_tol * scale) {
      v *= std::conj(v(i)) / a;
      return;
    }
  }
}

// ---------- subspaces ----------

// Orthonormal basis of the column span, SVD-thresholded relative to the
// largest singular value. Returns a dim x rank matrix (rank possibly 0).
inline CMatrix orthonormal_span(const CMatrix& cols, double rel_tol = 1e-8) {
  if (cols.cols() == 0) return CMatrix(cols.rows(), 0);
  Eigen::JacobiSVD<CMatrix> svd(cols, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  const double cut = sv.size() ? sv(0) * rel_tol : 0.0;
  Eigen::Index r = 0;
  while (r < sv.size() && sv(r) > cut && sv(r) > 0.0) ++r;
  CMatrix u = svd.matrixU().leftCols(r);
  for (Eigen::Index k = 0; k < u.cols(); ++k) fix_phase(u.col(k));
  return u;
}

// Sines of principal angles of span(u) against span(v); u, v orthonormal.
// Largest sine first. Empty u gives an empty list (vacuous inclusion).
inline std::vector<double> principal_angle_sines(const CMatrix& u, const CMatrix& v) {
  std::vector<double> out;
  if (u.cols() == 0) return out;
  if (v.cols() == 0) {
    out.assign(static_cast<std::size_t>(u.cols()), 1.0);
    return out;
  }
  // sin(theta_k) = singular values of (I - V V*) U.
  CMatrix residual = u - v * (v.adjoint() * u);
  Eigen::JacobiSVD<CMatrix> svd(residual);
  const auto& sv = svd.singularValues();
  for (Eigen::Index k = 0; k < sv.size(); ++k) out.push_back(std::min(1.0, sv(k)));
  return out;
}

inline double max_principal_angle_sine(const CMatrix& u, const CMatrix& v) {
  auto s = principal_angle_sines(u, v);
  return s.empty() ? 0.0 : s.front();
}

// Orthonormal kernel basis of a Hermitian matrix. Eigenvalues are cut
// relative to max(spectral radius, zero_scale); pass the working scale as
// zero_scale so a matrix that vanished at that scale keeps its full kernel.
inline CMatrix herm_kernel_basis(const CMatrix& m, double rel_tol = 1e-8,
                                 double zero_scale = 0.0) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m);
  const auto& ev = es.eigenvalues();
  const double top = ev.size() ? ev.cwiseAbs().maxCoeff() : 0.0;
  const double cut = rel_tol * std::max(top, zero_scale);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (std::abs(ev(i)) <= cut) keep.push_back(i);
  CMatrix out(m.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    out.col(static_cast<Eigen::Index>(k)) = es.eigenvectors().col(keep[k]);
    fix_phase(out.col(static_cast<Eigen::Index>(k)));
  }
  return out;
}

// ---------- misc ----------

inline void require(bool cond, const std::string& where, const std::string& what) {
  if (!cond) throw std::invalid_argument(where + ": " + what);
}

}  // namespace specmult
