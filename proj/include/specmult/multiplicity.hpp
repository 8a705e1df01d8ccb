#pragma once

// Multiplicity of eigenvalues of the compressed products C_n G_{n,n}(z),
// estimated three independent ways: root clustering of the characteristic
// polynomial, an approximate derivative gcd chain, and exact rational
// arithmetic on the support basis. The clustering path is the default
// arbiter; the exact path adjudicates anything the other two leave
// uncertified.

#include <cstdint>
#include <vector>

#include "specmult/operator_model.hpp"

namespace specmult {

struct CharPoly {
  CVector coeffs;  // ascending powers; leading coefficient (-1)^degree
  CVector roots;   // eigenvalue witnesses when the polynomial came from a matrix

  int degree() const { return static_cast<int>(coeffs.size()) - 1; }
  bool has_roots() const { return roots.size() > 0; }
};

// det(c g - x I) with the product eigenvalues kept as root witnesses.
CharPoly char_poly(const CMatrix& c, const CMatrix& g);
CharPoly poly_from_roots(const CVector& roots);
CharPoly poly_from_coeffs(CVector coeffs);  // no witnesses; roots via companion
Complex poly_eval(const CharPoly& p, Complex x);

enum class MultMethod { clustering, gcd_chain, exact_rational };

struct MultiplicityEstimate {
  int k = 0;
  MultMethod method = MultMethod::clustering;
  double tol = 0.0;  // effective merge radius / declared-zero threshold
  bool certified = false;
  std::vector<int> cluster_sizes;  // clustering path, descending
  std::vector<int> chain_degrees;  // gcd and exact paths
};

// Single-linkage clusters of points at the given merge radius; each cluster
// lists point indices in input order.
std::vector<std::vector<int>> cluster_indices(const std::vector<Complex>& pts,
                                              double radius);

// Merge radius cluster_tol * max(1, root spread); polynomials without
// witnesses get companion roots and a conditioning floor on the radius.
// Certified when every inter-cluster distance clears 10x the radius.
MultiplicityEstimate mult_by_clustering(const CharPoly& p, double cluster_tol = 1e-8);

// Degree sequence of p, gcd(p, p'), gcd(., p''), ...; k = steps until the
// chain hits a constant. Uncertified when any remainder norm lands within a
// factor 10 of the declared-zero threshold.
MultiplicityEstimate mult_by_gcd(const CharPoly& p, double gcd_tol = 1e-8);

// Exact multiplicity at real E via the support-basis product and an exact
// gcd chain; the structural zero eigenvalues contributed by rank-deficient
// C are divided out first.
MultiplicityEstimate mult_exact(const ModelInstance& model, int n, double e_real);

struct ZException {
  int sample = 0;
  Complex z;
  int k = 0;
};

struct MnEstimate {
  int block = 0;
  int value = 0;    // max over samples; the common value when constant
  bool constant = false;
  std::vector<int> per_sample;
  std::vector<ZException> exceptions;  // grid points below their sample max
};

// Per-disorder-sample max of the clustering estimate over a Halton z-grid in
// [-||A||, ||A||] x [0.05, 2], plus the constancy verdict across samples.
MnEstimate estimate_M_n(const ModelInstance& model, int n, int n_samples, int n_z,
                        std::uint64_t seed, double cluster_tol = 1e-8);

// Structural upper bound: eigenvalue multiplicity of the compressed free
// operator when C_n is a projection, otherwise of the C_n eigenvalues.
int corollary_bound(const ModelInstance& model, int n, double cluster_tol = 1e-8);

// Max eigenvalue multiplicity of the assembled operator.
int global_degeneracy(const ModelInstance& model, double cluster_tol = 1e-8);

// Multiplicity at real E off the spectrum via the Hermitian similarity
// sqrt(C) G sqrt(C); certified when the clustering path agrees.
MultiplicityEstimate real_E_mult(const ModelInstance& model, int n, double e_real,
                                 double cluster_tol = 1e-8);

}  // namespace specmult
