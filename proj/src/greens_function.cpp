#include "specmult/greens_function.hpp"

#include <algorithm>
#include <cmath>

namespace specmult {

namespace {

constexpr double kBackwardErrTol = 1e-10;
constexpr double kWeightTol = 1e-10;

// Pole strength of G_{n,m} at eigenvector psi: both compressions must be
// nonzero for the boundary value to blow up.
double pole_strength(const CMatrix& bn, const CMatrix& bm, const CVector& psi) {
  return (bn.adjoint() * psi).norm() * (bm.adjoint() * psi).norm();
}

}  // namespace

ResolventSolver::ResolventSolver(const ModelInstance& model, Complex z)
    : model_(&model), z_(z) {
  require(model.is_assembled(), "ResolventSolver", "model is not assembled");
  CMatrix m = model.assembled;
  m.diagonal().array() -= z;
  mat_norm_ = m.norm();
  lu_.compute(m);
  cache_.assign(static_cast<std::size_t>(model.block_count()), std::nullopt);
}

const CMatrix& ResolventSolver::solved_basis(int m) {
  require(m >= 0 && m < model_->block_count(), "ResolventSolver", "block index out of range");
  auto& slot = cache_[static_cast<std::size_t>(m)];
  if (!slot) {
    const CMatrix b = embedded_basis(*model_, m);
    CMatrix x = lu_.solve(b);
    if (!x.allFinite())
      throw std::runtime_error("ResolventSolver: singular factorization (non-finite solve)");
    CMatrix shifted = model_->assembled * x - z_ * x;
    const double backward =
        (shifted - b).norm() / (mat_norm_ * x.norm() + b.norm());
    if (backward > kBackwardErrTol)
      throw std::runtime_error("ResolventSolver: solve backward error " +
                               std::to_string(backward) + " exceeds tolerance");
    slot = std::move(x);
  }
  return *slot;
}

CMatrix ResolventSolver::block(int n, int m) {
  const CMatrix bn = embedded_basis(*model_, n);
  return bn.adjoint() * solved_basis(m);
}

GreenBlock green_block(const ModelInstance& model, int n, int m, Complex z) {
  if (z.imag() == 0.0) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(model.assembled, Eigen::EigenvaluesOnly);
    const double dist = (es.eigenvalues().array() - z.real()).abs().minCoeff();
    require(dist >= 1e-8, "green_block", "real z closer than 1e-8 to the spectrum");
  }
  ResolventSolver solver(model, z);
  return GreenBlock{z, n, m, solver.block(n, m)};
}

// ---------- boundary values ----------

EpsilonSchedule EpsilonSchedule::geometric(int k_max, double top) {
  EpsilonSchedule s;
  for (int k = 0; k <= k_max; ++k) s.eps.push_back(std::ldexp(top, -k));
  return s;
}

BoundaryValue boundary_value(const ModelInstance& model, int n, int m, double e_real,
                             int side, const EpsilonSchedule& sched) {
  require(side == 1 || side == -1, "boundary_value", "side must be +1 or -1");
  require(!sched.eps.empty(), "boundary_value", "empty epsilon schedule");
  require(model.is_assembled(), "boundary_value", "model is not assembled");

  const double eps_min = sched.eps.back();
  {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(model.assembled);
    const CMatrix bn = embedded_basis(model, n);
    const CMatrix bm = embedded_basis(model, m);
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
      if (std::abs(es.eigenvalues()(i) - e_real) >= 10.0 * eps_min) continue;
      if (pole_strength(bn, bm, es.eigenvectors().col(i)) > kWeightTol)
        throw AtomProximityError(
            "boundary_value: limit not attained, E within 10*eps_min of a weighted atom");
    }
  }

  BoundaryValue out;
  CMatrix g_prev, r_prev;
  double norm_prev = 0.0;
  int growth_streak = 0;
  for (std::size_t k = 0; k < sched.eps.size(); ++k) {
    const double eps = sched.eps[k];
    ResolventSolver solver(model, Complex(e_real, side * eps));
    CMatrix g = solver.block(n, m);
    out.eps_used.push_back(eps);

    const double gn = g.norm();
    if (k > 0) {
      growth_streak = (gn > 1.7 * norm_prev) ? growth_streak + 1 : 0;
      if (growth_streak >= 3) out.diverging = true;
    }
    norm_prev = gn;

    if (k > 0) {
      CMatrix r = 2.0 * g - g_prev;  // cancels the O(eps) term on a ratio-2 grid
      if (r_prev.size() > 0) out.diffs.push_back(op_norm(r - r_prev));
      r_prev = std::move(r);
      out.limit = GreenBlock{Complex(e_real, 0.0), n, m, r_prev};
    } else {
      out.limit = GreenBlock{Complex(e_real, 0.0), n, m, g};
    }
    g_prev = std::move(g);

    const std::size_t nd = out.diffs.size();
    if (nd >= 3 && out.diffs[nd - 1] < sched.stall_tol &&
        out.diffs[nd - 2] < sched.stall_tol && out.diffs[nd - 3] < sched.stall_tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

// ---------- rank-update identities ----------

RankUpdateReport rank_update_check(const ModelInstance& model, int p, double lambda,
                                   Complex z) {
  require(model.is_assembled(), "rank_update_check", "model is not assembled");
  require(p >= 0 && p < model.block_count(), "rank_update_check", "block index out of range");

  ModelInstance pert = model;
  {
    const PerturbationBlock& b = model.blocks[static_cast<std::size_t>(p)];
    const int rs = static_cast<int>(b.support.size());
    for (int i = 0; i < rs; ++i)
      for (int j = 0; j < rs; ++j)
        pert.assembled(b.support[i], b.support[j]) += lambda * b.c(i, j);
  }

  ResolventSolver base(model, z);
  ResolventSolver upd(pert, z);

  const int nb = model.block_count();
  const int rp = model.blocks[static_cast<std::size_t>(p)].rank;
  const CMatrix cp = model.blocks[static_cast<std::size_t>(p)].c_eigs.asDiagonal();
  const CMatrix eye = CMatrix::Identity(rp, rp);

  const CMatrix gpp0 = base.block(p, p);
  const CMatrix gpp1 = upd.block(p, p);

  RankUpdateReport rep;
  const CMatrix factor = eye + lambda * cp * gpp0;
  rep.det_guard = std::abs(factor.determinant());
  if (rep.det_guard < 1e-12)
    throw std::runtime_error("rank_update_check: det(I + lambda C G_pp) vanishes");
  const CMatrix w = factor.inverse();

  rep.res_factorized =
      op_norm(gpp1 - gpp0 * w) / std::max(1.0, op_norm(gpp1));
  rep.res_inverse_pair =
      op_norm((eye - lambda * cp * gpp1) * factor - eye);

  for (int n = 0; n < nb; ++n) {
    const CMatrix gnp0 = base.block(n, p);
    for (int m = 0; m < nb; ++m) {
      const CMatrix gnm0 = base.block(n, m);
      const CMatrix gpm0 = base.block(p, m);
      const CMatrix gnm1 = upd.block(n, m);
      const double scale = std::max(1.0, op_norm(gnm1));

      const CMatrix rhs1 = gnm0 - lambda * gnp0 * w * cp * gpm0;
      rep.res_offdiag = std::max(rep.res_offdiag, op_norm(gnm1 - rhs1) / scale);

      const CMatrix rhs2 = gnm0 - lambda * gnp0 * cp * gpm0 +
                           lambda * lambda * gnp0 * cp * gpp1 * cp * gpm0;
      rep.res_second_order =
          std::max(rep.res_second_order, op_norm(gnm1 - rhs2) / scale);
    }
  }
  return rep;
}

// ---------- adjoint symmetry ----------

namespace {

// Kernel basis of a Hermitian matrix at a relative threshold; the whole space
// when the matrix is numerically zero.
CMatrix herm_kernel(const CMatrix& m, double rel_tol, double zero_scale) {
  const int r = static_cast<int>(m.rows());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m);
  const double top = es.eigenvalues().cwiseAbs().maxCoeff();
  if (top <= zero_scale) return CMatrix::Identity(r, r);
  std::vector<int> keep;
  for (int i = 0; i < r; ++i)
    if (std::abs(es.eigenvalues()(i)) <= rel_tol * top) keep.push_back(i);
  CMatrix out(r, static_cast<int>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k)
    out.col(static_cast<Eigen::Index>(k)) = es.eigenvectors().col(keep[k]);
  return out;
}

}  // namespace

AdjointSymmetryReport adjoint_symmetry_check(const ModelInstance& model, int k, int p,
                                             double e_real, int side,
                                             const EpsilonSchedule& sched) {
  AdjointSymmetryReport rep;
  CMatrix kernel;
  try {
    BoundaryValue bv = boundary_value(model, p, p, e_real, side, sched);
    const CMatrix im = antiherm_part(bv.limit.matrix);
    kernel = herm_kernel(im, 1e-8, 1e-10 * std::max(1.0, op_norm(bv.limit.matrix)));
  } catch (const AtomProximityError&) {
    // At a weighted atom the imaginary part is dominated by the atom weight;
    // the relative threshold extracts the kernel from the last-epsilon
    // evaluation directly.
    ResolventSolver solver(model, Complex(e_real, side * sched.eps.back()));
    const CMatrix g = solver.block(p, p);
    kernel = herm_kernel(antiherm_part(g), 1e-8, 0.0);
  }

  rep.kernel_dim = static_cast<int>(kernel.cols());
  if (rep.kernel_dim == 0) {
    rep.vacuous = true;
    return rep;
  }

  // Defect restricted to the kernel. On kernel vectors the atom contributions
  // cancel, so the restricted limit exists even when the full matrix boundary
  // value diverges; extrapolate it along the schedule.
  CMatrix d_prev, r_prev, limit;
  std::size_t small_streak = 0;
  for (std::size_t i = 0; i < sched.eps.size(); ++i) {
    const Complex z(e_real, side * sched.eps[i]);
    ResolventSolver solver(model, z);
    const CMatrix gkp = solver.block(k, p);
    const CMatrix gpk = solver.block(p, k);
    CMatrix d = (gkp - gpk.adjoint()) * kernel;
    if (i > 0) {
      CMatrix r = 2.0 * d - d_prev;
      if (r_prev.size() > 0) {
        small_streak = (op_norm(r - r_prev) < sched.stall_tol) ? small_streak + 1 : 0;
      }
      r_prev = std::move(r);
      limit = r_prev;
    } else {
      limit = d;
    }
    d_prev = std::move(d);
    if (small_streak >= 3) break;
  }
  for (Eigen::Index j = 0; j < limit.cols(); ++j)
    rep.residual = std::max(rep.residual, limit.col(j).norm());
  return rep;
}

// ---------- Schur complement form ----------

namespace {

// Exact coordinate complement when the block basis is a plain site selection;
// Householder completion otherwise.
CMatrix complement_basis(const ModelInstance& model, const CMatrix& b) {
  const int dim = static_cast<int>(b.rows());
  std::vector<int> hit(static_cast<std::size_t>(dim), 0);
  bool coordinate = true;
  for (Eigen::Index j = 0; j < b.cols() && coordinate; ++j) {
    int ones = 0, pos = -1;
    for (Eigen::Index i = 0; i < dim; ++i) {
      const Complex v = b(i, j);
      if (v == Complex(1.0, 0.0)) {
        ++ones;
        pos = static_cast<int>(i);
      } else if (v != Complex(0.0, 0.0)) {
        coordinate = false;
        break;
      }
    }
    if (ones != 1)
      coordinate = false;
    else
      hit[static_cast<std::size_t>(pos)] = 1;
  }
  if (coordinate) {
    CMatrix w = CMatrix::Zero(dim, dim - static_cast<int>(b.cols()));
    int col = 0;
    for (int i = 0; i < dim; ++i)
      if (!hit[static_cast<std::size_t>(i)]) w(i, col++) = 1.0;
    return w;
  }
  Eigen::HouseholderQR<CMatrix> qr(b);
  CMatrix q = qr.householderQ() * CMatrix::Identity(dim, dim);
  return q.rightCols(dim - b.cols());
}

}  // namespace

SchurReport schur_green(const ModelInstance& model, int n, Complex z) {
  require(model.is_assembled(), "schur_green", "model is not assembled");
  require(n >= 0 && n < model.block_count(), "schur_green", "block index out of range");
  const CMatrix b = embedded_basis(model, n);
  for (int m = 0; m < model.block_count(); ++m) {
    if (m == n) continue;
    const double leak = (b.adjoint() * embedded_c(model, m) * b).norm();
    require(leak <= 1e-12 * std::max(1.0, op_norm_herm(model.blocks[std::size_t(m)].c)),
            "schur_green", "blocks are not mutually orthogonal");
  }

  const int r = static_cast<int>(b.cols());
  SchurReport rep;
  rep.inner = b.adjoint() * model.a.entries * b +
              CMatrix(model.omega(n) * compressed_c(model, n)) -
              z * CMatrix::Identity(r, r);

  const CMatrix w = complement_basis(model, b);
  if (w.cols() == 0) {
    rep.coupling = CMatrix::Zero(r, r);
  } else {
    CMatrix inner_c = w.adjoint() * model.assembled * w;
    inner_c.diagonal().array() -= z;
    const CMatrix wings = w.adjoint() * model.a.entries * b;
    rep.coupling = wings.adjoint() * Eigen::PartialPivLU<CMatrix>(inner_c).solve(wings);
  }
  rep.green = GreenBlock{z, n, n, (rep.inner - rep.coupling).inverse()};
  return rep;
}

}  // namespace specmult
