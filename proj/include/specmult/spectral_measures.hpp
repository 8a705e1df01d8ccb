#pragma once

// Spectral decompositions with gap clustering, block trace measures and
// matrix weights, Poltoratskii ratios along the epsilon schedule, cyclic
// subspaces and projections, the atomic singular-inclusion check, spectral
// averaging scaling, and the kernel inclusions at perturbed atoms. All
// spectrum is atomic at finite dimension; "singular" here always means
// "atomic".

#include <cstdint>
#include <vector>

#include "specmult/greens_function.hpp"
#include "specmult/operator_model.hpp"

namespace specmult {

struct SpectralDecomposition {
  RVector eigenvalues;  // ascending
  CMatrix eigenvectors;
  std::vector<std::vector<int>> clusters;  // consecutive-gap partition
  double op_norm = 0.0;

  int atom_count() const { return static_cast<int>(clusters.size()); }
  double atom_energy(int j) const;  // mean of the cluster's eigenvalues
  CMatrix atom_projector(int j) const;
};

// Full eigendecomposition of the assembled operator; clusters merge
// consecutive eigenvalues with gap at most cluster_tol * ||A^omega||.
SpectralDecomposition decompose(const ModelInstance& model, double cluster_tol = 1e-8);

struct TraceAtom {
  double energy = 0.0;
  double weight = 0.0;  // tr(P_n Pi_j P_n)
};

// Nonnegative atom weights summing to rank(P_n).
std::vector<TraceAtom> trace_measure(const ModelInstance& model,
                                     const SpectralDecomposition& decomp, int n);

struct WeightAtom {
  double energy = 0.0;
  CMatrix w;       // compressed P_n Pi_j P_n, r x r PSD
  double trace = 0.0;
  CMatrix w_norm;  // w / trace, empty when skipped
  RVector f;       // eigenvalues of w_norm, descending
  bool skipped = false;  // zero trace weight at this atom
};

struct MatrixMeasure {
  std::vector<WeightAtom> atoms;
  int skipped_count = 0;
};

MatrixMeasure matrix_weight(const ModelInstance& model,
                            const SpectralDecomposition& decomp, int n);

struct PoltoratskiiReport {
  int atom_index = -1;
  double atom_energy = 0.0;
  std::vector<double> eps;
  std::vector<double> deviations;  // ||G/tr G - W_norm|| per epsilon
  double final_deviation = 0.0;
};

// Ratio G_{n,n}(E_j + i eps)/tr G_{n,n}(E_j + i eps) against the normalized
// matrix weight of the atom nearest e_atom. Throws "atoms unresolved" when a
// neighboring atom sits within 10x the schedule floor.
PoltoratskiiReport poltoratskii_ratio(const ModelInstance& model, int n, double e_atom,
                                      const EpsilonSchedule& sched =
                                          EpsilonSchedule::geometric());

struct CyclicSubspace {
  CMatrix basis;  // orthonormal columns spanning span{Pi_j phi : j, phi}
  double invariance_defect = 0.0;   // ||(I - P) A P||
  double containment_defect = 0.0;  // max over generators of the residual
  double sum_split_defect = 0.0;    // joint span vs sum of per-generator spans
};

CyclicSubspace cyclic_subspace(const ModelInstance& model,
                               const std::vector<CVector>& generators,
                               double cluster_tol = 1e-8);

struct CyclicProjection {
  CVector projection;      // sum_j f(E_j) Pi_j phi
  std::vector<Complex> f;  // per-atom Radon-Nikodym values (0 off the support)
  double oracle_defect = 0.0;  // distance to the Gram projector of cyclic(phi)
};

// Projection of psi onto the cyclic subspace of phi through per-atom ratios
// f(E_j) = <phi, Pi_j psi>/<phi, Pi_j phi>.
CyclicProjection cyclic_projection(const ModelInstance& model, const CVector& phi,
                                   const CVector& psi, double cluster_tol = 1e-8);

struct InclusionSample {
  double lambda = 0.0;
  double max_angle_sine = 0.0;  // weighted-atom part of cyclic(Q) vs cyclic(P_p)
  bool verdict = false;
  std::vector<double> unweighted_atoms;  // atoms reached by Q but invisible to P_p
};

// For each lambda: H_lambda = assembled + lambda C_p; compares the cyclic
// subspace of span(q) with the cyclic subspace of the block range, restricted
// to atoms carrying block trace weight.
std::vector<InclusionSample> singular_inclusion_check(const ModelInstance& model, int p,
                                                      const CMatrix& q_span,
                                                      const std::vector<double>& lambdas,
                                                      double tol = 1e-8);

struct AveragingReport {
  std::vector<double> interval_sizes;
  std::vector<double> means;  // mean over lambda of <phi, E_lambda(I_k) phi>
  double slope = 0.0;         // log-log regression over nonzero means
  bool degenerate = false;    // every mean vanished
};

// Monte Carlo mean of the spectral mass phi places in nested dyadic
// intervals, under H_lambda = assembled + lambda C_p with lambda ~ law.
AveragingReport spectral_averaging_estimate(const ModelInstance& model, int p,
                                            const CVector& phi, double center,
                                            double width0, int n_intervals,
                                            const DisorderSpec& lambda_law,
                                            int samples, std::uint64_t seed);

struct KernelAtomReport {
  double energy = 0.0;
  double weight = 0.0;   // block trace weight under H_lambda
  bool vacuous = false;  // limit vanished: atom invisible to the block
  bool base_spectrum_clash = false;  // atom too close to sigma(A^omega)
  bool converged = false;
  CMatrix limit;                     // extrapolated eps C G^lambda C, r x r
  double angle_range_in_ker = 0.0;   // range(limit) vs ker(C^+ + lambda G)
  double angle_ker_in_imker = 0.0;   // ker(C^+ + lambda G) vs ker(Im G)
};

// At each atom E of H_lambda separated from sigma(A^omega): the scaled limit
// eps C_p G^lambda_{p,p}(E+i eps) C_p has range inside ker(C_p^+ + lambda
// G_{p,p}(E)), which sits inside ker(Im G_{p,p}(E)).
std::vector<KernelAtomReport> kernel_inclusion_check(const ModelInstance& model, int p,
                                                     double lambda,
                                                     const EpsilonSchedule& sched =
                                                         EpsilonSchedule::geometric());

}  // namespace specmult
