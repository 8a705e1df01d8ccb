#include "specmult/multiplicity.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "specmult/exact_rational.hpp"
#include "specmult/greens_function.hpp"
#include "specmult/rng.hpp"

namespace specmult {

namespace {

CVector vieta_coeffs(const CVector& roots) {
  // det(M - xI) = prod(r_i - x) = (-1)^l prod(x - r_i).
  Eigen::Index l = roots.size();
  CVector c = CVector::Zero(l + 1);
  c[0] = 1.0;
  for (Eigen::Index i = 0; i < l; ++i)
    for (Eigen::Index k = i + 1; k-- > 0;) {
      c[k + 1] += c[k];
      c[k] *= -roots[i];
    }
  if (l % 2 == 1) c = -c;
  return c;
}

CVector companion_roots(const CVector& coeffs) {
  Eigen::Index l = coeffs.size() - 1;
  if (l <= 0) return CVector(0);
  CMatrix comp = CMatrix::Zero(l, l);
  Complex lead = coeffs[l];
  for (Eigen::Index i = 0; i + 1 < l; ++i) comp(i + 1, i) = 1.0;
  for (Eigen::Index i = 0; i < l; ++i) comp(i, l - 1) = -coeffs[i] / lead;
  Eigen::ComplexEigenSolver<CMatrix> es(comp, false);
  return es.eigenvalues();
}

double root_spread(const std::vector<Complex>& pts) {
  double s = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      s = std::max(s, std::abs(pts[i] - pts[j]));
  return s;
}

// Clusters sorted reals by consecutive gaps; returns the largest run.
int max_line_cluster(std::vector<double> vals, double radius) {
  if (vals.empty()) return 0;
  std::sort(vals.begin(), vals.end());
  int best = 1, run = 1;
  for (std::size_t i = 1; i < vals.size(); ++i) {
    run = (vals[i] - vals[i - 1] <= radius) ? run + 1 : 1;
    best = std::max(best, run);
  }
  return best;
}

}  // namespace

CharPoly char_poly(const CMatrix& c, const CMatrix& g) {
  require(c.rows() == c.cols() && g.rows() == g.cols() && c.rows() == g.rows(),
          "char_poly", "square matrices of equal size expected");
  CMatrix prod = c * g;
  Eigen::ComplexEigenSolver<CMatrix> es(prod, false);
  CharPoly p;
  p.roots = es.eigenvalues();
  p.coeffs = vieta_coeffs(p.roots);
  return p;
}

CharPoly poly_from_roots(const CVector& roots) {
  CharPoly p;
  p.roots = roots;
  p.coeffs = vieta_coeffs(roots);
  return p;
}

CharPoly poly_from_coeffs(CVector coeffs) {
  require(coeffs.size() >= 1 && std::abs(coeffs[coeffs.size() - 1]) > 0.0,
          "poly_from_coeffs", "nonzero leading coefficient expected");
  CharPoly p;
  p.coeffs = std::move(coeffs);
  return p;
}

Complex poly_eval(const CharPoly& p, Complex x) {
  Complex acc = 0.0;
  for (Eigen::Index k = p.coeffs.size(); k-- > 0;) acc = acc * x + p.coeffs[k];
  return acc;
}

std::vector<std::vector<int>> cluster_indices(const std::vector<Complex>& pts,
                                              double radius) {
  std::size_t n = pts.size();
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&parent](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(pts[i] - pts[j]) <= radius) parent[find(int(j))] = find(int(i));
  std::vector<std::vector<int>> groups;
  std::vector<int> slot(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    int r = find(int(i));
    if (slot[r] < 0) {
      slot[r] = static_cast<int>(groups.size());
      groups.emplace_back();
    }
    groups[slot[r]].push_back(int(i));
  }
  return groups;
}

MultiplicityEstimate mult_by_clustering(const CharPoly& p, double cluster_tol) {
  require(cluster_tol > 0.0, "mult_by_clustering", "positive tolerance expected");
  CVector rv = p.has_roots() ? p.roots : companion_roots(p.coeffs);
  std::vector<Complex> roots(rv.data(), rv.data() + rv.size());

  MultiplicityEstimate est;
  est.method = MultMethod::clustering;
  if (roots.empty()) {
    est.k = 0;
    est.certified = true;
    return est;
  }

  double spread = root_spread(roots);
  double radius = cluster_tol * std::max(1.0, spread);
  if (!p.has_roots()) {
    // Companion extraction splits an exact m-fold root by about
    // (u * coeff_scale)^(1/m); floor the radius so such splits still merge.
    double lead = std::abs(p.coeffs[p.coeffs.size() - 1]);
    double cscale = 0.0;
    for (Eigen::Index k = 0; k < p.coeffs.size(); ++k)
      cscale = std::max(cscale, std::abs(p.coeffs[k]) / lead);
    double floor = 2.0 * std::sqrt(std::numeric_limits<double>::epsilon() * cscale);
    radius = std::max(radius, floor);
  }
  est.tol = radius;

  auto groups = cluster_indices(roots, radius);
  for (const auto& g : groups) est.cluster_sizes.push_back(static_cast<int>(g.size()));
  std::sort(est.cluster_sizes.begin(), est.cluster_sizes.end(), std::greater<>());
  est.k = est.cluster_sizes.front();

  double min_gap = std::numeric_limits<double>::infinity();
  std::vector<int> label(roots.size());
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (int i : groups[g]) label[i] = static_cast<int>(g);
  for (std::size_t i = 0; i < roots.size(); ++i)
    for (std::size_t j = i + 1; j < roots.size(); ++j)
      if (label[i] != label[j])
        min_gap = std::min(min_gap, std::abs(roots[i] - roots[j]));
  est.certified = min_gap > 10.0 * radius;
  return est;
}

namespace {

using FPoly = std::vector<Complex>;  // ascending, max-norm semantics

double fpoly_max(const FPoly& p) {
  double m = 0.0;
  for (const auto& c : p) m = std::max(m, std::abs(c));
  return m;
}

// Scales to unit max-norm and trims leading coefficients that are zero at
// working precision.
FPoly fpoly_normalize(FPoly p) {
  double m = fpoly_max(p);
  if (m == 0.0) return {};
  for (auto& c : p) c /= m;
  while (!p.empty() && std::abs(p.back()) <= 1e-11) p.pop_back();
  return p;
}

FPoly fpoly_deriv(const FPoly& p) {
  FPoly d;
  for (std::size_t k = 1; k < p.size(); ++k) d.push_back(p[k] * double(k));
  return d;
}

FPoly fpoly_mod(FPoly a, const FPoly& b) {
  while (a.size() >= b.size() && !a.empty()) {
    Complex q = a.back() / b.back();
    std::size_t off = a.size() - b.size();
    for (std::size_t j = 0; j < b.size(); ++j) a[off + j] -= q * b[j];
    a.pop_back();
  }
  return a;
}

// Euclid with a declared-zero cut on the remainder max-norm. Remainders
// within a factor 10 of the cut, on either side, set the band flag.
FPoly fpoly_gcd(FPoly a, FPoly b, double tol, bool& band) {
  a = fpoly_normalize(std::move(a));
  b = fpoly_normalize(std::move(b));
  if (a.size() < b.size()) std::swap(a, b);
  while (b.size() > 1) {
    FPoly r = fpoly_mod(a, b);
    double rn = fpoly_max(r);
    if (rn > tol / 10.0 && rn < 10.0 * tol) band = true;
    if (rn <= tol) return b;
    a = std::move(b);
    b = fpoly_normalize(std::move(r));
  }
  return b.empty() ? a : b;  // coprime (constant gcd) unless b vanished exactly
}

}  // namespace

MultiplicityEstimate mult_by_gcd(const CharPoly& p, double gcd_tol) {
  require(gcd_tol > 0.0, "mult_by_gcd", "positive tolerance expected");
  FPoly p0(p.coeffs.data(), p.coeffs.data() + p.coeffs.size());
  p0 = fpoly_normalize(std::move(p0));
  require(!p0.empty(), "mult_by_gcd", "nonzero polynomial expected");

  MultiplicityEstimate est;
  est.method = MultMethod::gcd_chain;
  est.tol = gcd_tol;
  est.chain_degrees.push_back(static_cast<int>(p0.size()) - 1);

  bool band = false;
  FPoly h = p0;
  FPoly d = p0;
  while (h.size() > 1) {
    d = fpoly_deriv(d);
    h = fpoly_gcd(h, d, gcd_tol, band);
    est.chain_degrees.push_back(static_cast<int>(h.size()) - 1);
  }
  est.k = static_cast<int>(est.chain_degrees.size()) - 1;
  est.certified = !band;
  return est;
}

MultiplicityEstimate mult_exact(const ModelInstance& model, int n, double e_real) {
  require(model.is_assembled(), "mult_exact", "assembled model expected");
  require(n >= 0 && n < model.block_count(), "mult_exact", "block index out of range");
  const PerturbationBlock& blk = model.blocks[static_cast<std::size_t>(n)];
  std::size_t rs = blk.support.size();

  exact::Matrix m = exact::matrix_from_cmatrix(model.assembled);
  exact::GRat e = exact::grat_from_complex(Complex(e_real, 0.0));
  for (std::size_t i = 0; i < m.size(); ++i) m[i][i] = m[i][i] - e;

  exact::Matrix rhs(m.size(), std::vector<exact::GRat>(rs));
  for (std::size_t j = 0; j < rs; ++j)
    rhs[static_cast<std::size_t>(blk.support[j])][j] = exact::GRat(1);
  exact::Matrix x = exact::solve(m, rhs);

  exact::Matrix g(rs, std::vector<exact::GRat>(rs));
  for (std::size_t i = 0; i < rs; ++i)
    g[i] = x[static_cast<std::size_t>(blk.support[i])];

  exact::Matrix c = exact::matrix_from_cmatrix(blk.c);
  exact::Matrix prod(rs, std::vector<exact::GRat>(rs));
  for (std::size_t i = 0; i < rs; ++i)
    for (std::size_t j = 0; j < rs; ++j) {
      exact::GRat acc;
      for (std::size_t l = 0; l < rs; ++l) acc = acc + c[i][l] * g[l][j];
      prod[i][j] = acc;
    }

  exact::Poly ps = exact::char_poly(prod);
  // The support basis pads the rank-r product with rs - r structural zero
  // eigenvalues; divide the corresponding power of (-x) back out.
  int structural = static_cast<int>(rs) - exact::rank(c);
  for (int s = 0; s < structural; ++s) {
    if (!ps.front().is_zero())
      throw std::logic_error("mult_exact: expected structural zero root");
    ps.erase(ps.begin());
    for (auto& v : ps) v = -v;
  }

  MultiplicityEstimate est;
  est.method = MultMethod::exact_rational;
  est.certified = true;
  est.chain_degrees = exact::gcd_chain_degrees(ps);
  est.k = static_cast<int>(est.chain_degrees.size()) - 1;
  return est;
}

MnEstimate estimate_M_n(const ModelInstance& model, int n, int n_samples, int n_z,
                        std::uint64_t seed, double cluster_tol) {
  require(n >= 0 && n < model.block_count(), "estimate_M_n", "block index out of range");
  require(n_samples >= 1 && n_z >= 1, "estimate_M_n", "positive sample counts expected");
  MnEstimate out;
  out.block = n;
  ModelInstance base = model;
  base.disorder.seed = seed;
  for (int s = 0; s < n_samples; ++s) {
    ModelInstance inst = with_disorder(base, static_cast<std::uint64_t>(s));
    double r = op_norm_herm(inst.assembled);
    CMatrix chat = compressed_c(inst, n);
    std::vector<Complex> zs;
    std::vector<int> ks;
    for (int j = 1; j <= n_z; ++j) {
      auto [zr, zi] = halton_rect(static_cast<std::uint64_t>(j), -r, r, 0.05, 2.0);
      Complex z(zr, zi);
      ResolventSolver solver(inst, z);
      CharPoly p = char_poly(chat, solver.block(n, n));
      zs.push_back(z);
      ks.push_back(mult_by_clustering(p, cluster_tol).k);
    }
    int m_hat = *std::max_element(ks.begin(), ks.end());
    out.per_sample.push_back(m_hat);
    for (std::size_t j = 0; j < ks.size(); ++j)
      if (ks[j] != m_hat) out.exceptions.push_back({s, zs[j], ks[j]});
  }
  out.value = *std::max_element(out.per_sample.begin(), out.per_sample.end());
  out.constant = std::all_of(out.per_sample.begin(), out.per_sample.end(),
                             [&out](int v) { return v == out.value; });
  return out;
}

int corollary_bound(const ModelInstance& model, int n, double cluster_tol) {
  require(n >= 0 && n < model.block_count(), "corollary_bound",
          "block index out of range");
  const PerturbationBlock& blk = model.blocks[static_cast<std::size_t>(n)];
  bool projection = true;
  for (Eigen::Index i = 0; i < blk.c_eigs.size(); ++i)
    projection = projection && std::abs(blk.c_eigs[i] - 1.0) <= 1e-10;
  std::vector<double> vals;
  if (projection) {
    CMatrix b = embedded_basis(model, n);
    CMatrix compressed = b.adjoint() * model.a.entries * b;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(compressed, Eigen::EigenvaluesOnly);
    vals.assign(es.eigenvalues().data(), es.eigenvalues().data() + blk.rank);
  } else {
    vals.assign(blk.c_eigs.data(), blk.c_eigs.data() + blk.c_eigs.size());
  }
  std::sort(vals.begin(), vals.end());
  double spread = vals.back() - vals.front();
  return max_line_cluster(vals, cluster_tol * std::max(1.0, spread));
}

int global_degeneracy(const ModelInstance& model, double cluster_tol) {
  require(model.is_assembled(), "global_degeneracy", "assembled model expected");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(model.assembled, Eigen::EigenvaluesOnly);
  std::vector<double> vals(es.eigenvalues().data(),
                           es.eigenvalues().data() + es.eigenvalues().size());
  double spread = vals.back() - vals.front();
  return max_line_cluster(vals, cluster_tol * std::max(1.0, spread));
}

MultiplicityEstimate real_E_mult(const ModelInstance& model, int n, double e_real,
                                 double cluster_tol) {
  GreenBlock gb = green_block(model, n, n, Complex(e_real, 0.0));
  const PerturbationBlock& blk = model.blocks[static_cast<std::size_t>(n)];
  CMatrix h = herm_part(gb.matrix);
  RVector sq = blk.c_eigs.cwiseSqrt();
  CMatrix sym = sq.asDiagonal() * h * sq.asDiagonal();
  Eigen::SelfAdjointEigenSolver<CMatrix> es(sym, Eigen::EigenvaluesOnly);
  std::vector<double> vals(es.eigenvalues().data(),
                           es.eigenvalues().data() + es.eigenvalues().size());
  double spread = vals.back() - vals.front();
  double radius = cluster_tol * std::max(1.0, spread);

  MultiplicityEstimate est;
  est.method = MultMethod::clustering;
  est.tol = radius;
  est.k = max_line_cluster(vals, radius);

  std::vector<double> sorted = vals;
  std::sort(sorted.begin(), sorted.end());
  int run = 1;
  std::vector<int> sizes;
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i] - sorted[i - 1] <= radius) {
      ++run;
    } else {
      sizes.push_back(run);
      run = 1;
    }
  }
  sizes.push_back(run);
  std::sort(sizes.begin(), sizes.end(), std::greater<>());
  est.cluster_sizes = std::move(sizes);

  MultiplicityEstimate cross =
      mult_by_clustering(char_poly(compressed_c(model, n), gb.matrix), cluster_tol);
  est.certified = cross.certified && cross.k == est.k;
  return est;
}

}  // namespace specmult
