#pragma once

// Block Green's functions G_{n,m}(z) = P_n (A^omega - z)^{-1} P_m in the fixed
// block bases, their real-axis boundary values, and the rank-update /
// adjoint-symmetry / Schur-complement identity checks.

#include <optional>
#include <vector>

#include "specmult/operator_model.hpp"

namespace specmult {

struct GreenBlock {
  Complex z;
  int n = 0, m = 0;
  CMatrix matrix;  // r_n x r_m in the block bases
};

// Thrown when a requested real-axis limit sits on top of a weighted atom.
struct AtomProximityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Factors (A^omega - z) once and serves compressed blocks. The solve guard is
// the normwise backward error at 1e-10; an absolute residual would be
// unattainable near the epsilon floor where ||X|| ~ 1/eps.
class ResolventSolver {
 public:
  ResolventSolver(const ModelInstance& model, Complex z);

  CMatrix block(int n, int m);          // B_n^* (A-z)^{-1} B_m
  const CMatrix& solved_basis(int m);   // (A-z)^{-1} B_m, cached
  Complex z() const { return z_; }

 private:
  const ModelInstance* model_;
  Complex z_;
  Eigen::PartialPivLU<CMatrix> lu_;
  double mat_norm_ = 0.0;
  std::vector<std::optional<CMatrix>> cache_;
};

GreenBlock green_block(const ModelInstance& model, int n, int m, Complex z);

// ---------- boundary values ----------

struct EpsilonSchedule {
  std::vector<double> eps;  // strictly decreasing
  double stall_tol = 1e-8;

  // 2^-k * top for k = 0..k_max.
  static EpsilonSchedule geometric(int k_max = 20, double top = 1e-2);
};

struct BoundaryValue {
  GreenBlock limit;                // Richardson extrapolant at the last step
  std::vector<double> eps_used;
  std::vector<double> diffs;       // successive extrapolant differences
  bool converged = false;
  bool diverging = false;
};

// G_{n,m}(E + side*i0) along the schedule with one Richardson step per eps
// halving. side is +1 or -1. Throws AtomProximityError when E is within
// 10*eps_min of an atom carrying weight in block n or m.
BoundaryValue boundary_value(const ModelInstance& model, int n, int m, double e_real,
                             int side, const EpsilonSchedule& sched = EpsilonSchedule::geometric());

// ---------- rank-update identities ----------

struct RankUpdateReport {
  double res_factorized = 0.0;   // G^l_pp = G_pp (I + l C G_pp)^{-1}
  double res_offdiag = 0.0;      // full-family update, first-order form
  double res_inverse_pair = 0.0; // (I - l C G^l_pp)(I + l C G_pp) = I
  double res_second_order = 0.0; // lambda^2 expansion
  double det_guard = 0.0;        // |det(I + l C G_pp)|
  double max() const {
    return std::max(std::max(res_factorized, res_offdiag),
                    std::max(res_inverse_pair, res_second_order));
  }
};

// Left sides use the directly assembled A^omega + lambda C_p; right sides use
// only blocks of A^omega (the second-order identity also uses the directly
// computed perturbed (p,p) block, as written).
RankUpdateReport rank_update_check(const ModelInstance& model, int p, double lambda,
                                   Complex z);

// ---------- adjoint symmetry on boundary kernels ----------

struct AdjointSymmetryReport {
  bool vacuous = false;  // kernel of Im G_pp(E +/- i0) is trivial
  int kernel_dim = 0;
  double residual = 0.0;  // max over kernel vectors of the adjoint defect
};

AdjointSymmetryReport adjoint_symmetry_check(const ModelInstance& model, int k, int p,
                                             double e_real, int side,
                                             const EpsilonSchedule& sched =
                                                 EpsilonSchedule::geometric());

// ---------- Schur complement form ----------

struct SchurReport {
  GreenBlock green;  // inv(inner - coupling)
  CMatrix inner;     // B^* A B + omega_n C - z
  CMatrix coupling;  // B^* A Q (Q^*(A^omega - z)Q)^{-1} Q^* A B; omega_n-free
};

SchurReport schur_green(const ModelInstance& model, int n, Complex z);

}  // namespace specmult
