#pragma once

// Finite Anderson-type models: a Hermitian background operator plus
// independently weighted positive finite-rank blocks whose range projections
// partition the space. Builders produce the lab's standard geometries.

#include <cstdint>
#include <string>
#include <vector>

#include "specmult/linalg.hpp"

namespace specmult {

struct SiteSpace {
  std::vector<std::string> labels;
  int dim() const { return static_cast<int>(labels.size()); }
};

// Dense Hermitian matrix. Hermiticity is exact by construction: builders fill
// symmetric entry pairs and assembly adds exactly Hermitian terms, so the
// constructor checks bit-level symmetry instead of a tolerance.
struct HermitianOperator {
  CMatrix entries;

  HermitianOperator() = default;
  explicit HermitianOperator(CMatrix m) : entries(std::move(m)) {
    require(is_exactly_hermitian(entries), "HermitianOperator",
            "entries are not exactly Hermitian");
  }
  int dim() const { return static_cast<int>(entries.rows()); }
};

struct DisorderSpec {
  std::string family;          // "uniform" or "gaussian"
  std::vector<double> params;  // uniform: {lo, hi}; gaussian: {mean, sigma}
  std::uint64_t seed = 0;
};

// One perturbation block: a PSD matrix on a support set of sites, plus its
// fixed orthonormal block basis (eigenbasis of C, eigenvalues descending,
// first significant component of each vector real positive). The projection
// onto range(C) in the ambient space is B B* with B the embedded basis.
struct PerturbationBlock {
  int index = 0;
  std::vector<int> support;  // ascending ambient site indices
  CMatrix c;                 // |support| x |support|, PSD
  int rank = 0;
  RVector c_eigs;  // positive eigenvalues, descending, length rank
  CMatrix basis;   // |support| x rank, orthonormal columns
};

constexpr double kRankTolRel = 1e-10;

PerturbationBlock make_block(int index, std::vector<int> support, CMatrix c,
                             double rank_tol_rel = kRankTolRel);

struct ModelInstance {
  SiteSpace sites;
  HermitianOperator a;
  std::vector<PerturbationBlock> blocks;
  DisorderSpec disorder;
  RVector omega;      // empty until sampled
  CMatrix assembled;  // empty until assembled

  int dim() const { return sites.dim(); }
  int block_count() const { return static_cast<int>(blocks.size()); }
  bool has_omega() const {
    return omega.size() == static_cast<Eigen::Index>(blocks.size()) && blocks.size() > 0;
  }
  bool is_assembled() const { return assembled.rows() == sites.dim() && sites.dim() > 0; }
};

// ---------- builders ----------

// L x F strip, hopping along x only; block n projects onto column n (all F
// fibers). With vertical_hopping the fibers couple and the column degeneracy
// is destroyed; that flag exists for contrast runs.
ModelInstance build_strip(int length, int fibers, bool vertical_hopping = false);

// Adjacency of the box {|x|_inf <= radius} in Z^d, d in {1,2}; block n is the
// indicator of the sup-norm shell at radius n.
ModelInstance build_shell_model(int d, int radius);

// Truncated dyadic column model: rows 0..2^levels-1, columns 1..levels,
// hopping along the column axis only; column n is partitioned into dyadic row
// bands of width 2^n, one block per band.
ModelInstance build_nested_model(int levels);

// Depth-truncated rooted Bethe lattice (root has branching K, every other
// interior vertex K-1 children). Blocks are forward subtrees of depth
// block_depth tiling the vertex set; requires block_depth | depth+1.
ModelInstance build_canopy_bethe(int branching, int depth, int block_depth);

// ---------- operations ----------

RVector sample_disorder(const DisorderSpec& spec, int count, std::uint64_t sample_index);

// Returns a copy with omega installed and assembled = A + sum_n omega_n C_n
// (fixed ascending block order; exact Hermiticity preserved).
ModelInstance with_omega(ModelInstance model, RVector omega);
ModelInstance with_disorder(ModelInstance model, std::uint64_t sample_index);

struct PartitionReport {
  bool ok = false;
  double defect = 0.0;  // ||sum_n P_n - I||
};
PartitionReport verify_partition(const ModelInstance& model, double tol = 1e-10);

// Block basis embedded into the ambient space: dim x rank.
CMatrix embedded_basis(const ModelInstance& model, int n);
// C_n as an ambient dim x dim matrix.
CMatrix embedded_c(const ModelInstance& model, int n);
// C_n compressed to the block basis: diag(c_eigs).
CMatrix compressed_c(const ModelInstance& model, int n);

}  // namespace specmult
