#include "specmult/tree_simplicity.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

#include "specmult/greens_function.hpp"

namespace specmult {

namespace {

struct TreeEigen {
  RVector values;
  CMatrix vectors;
};

TreeEigen tree_eigen(const RootedTree& tree, const RVector& tau, bool vectors) {
  CMatrix h = tree_hamiltonian(tree, tau);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(
      h, vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  TreeEigen out;
  out.values = es.eigenvalues();
  if (vectors) out.vectors = es.eigenvectors();
  return out;
}

double min_consecutive_gap(const RVector& sorted_vals) {
  double gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 1; i < sorted_vals.size(); ++i)
    gap = std::min(gap, sorted_vals[i] - sorted_vals[i - 1]);
  return gap;
}

std::vector<int> subtree_vertices(const RootedTree& tree, int root) {
  std::vector<int> out, stack{root};
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    out.push_back(v);
    for (int c : tree.children[static_cast<std::size_t>(v)]) stack.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

RootedTree build_rooted_tree(int branching, int depth) {
  require(branching >= 2, "build_rooted_tree", "branching >= 2 expected");
  require(depth >= 0, "build_rooted_tree", "nonnegative depth expected");
  RootedTree t;
  t.branching = branching;
  t.depth = depth;
  t.parent.push_back(-1);
  t.children.emplace_back();
  struct Frame {
    int vertex;
    int level;
    int next_child;
  };
  std::vector<Frame> stack{{0, 0, 0}};
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.level == depth) {
      t.boundary.push_back(f.vertex);
      stack.pop_back();
      continue;
    }
    if (f.next_child == branching) {
      stack.pop_back();
      continue;
    }
    ++f.next_child;
    int v = static_cast<int>(t.parent.size());
    t.parent.push_back(f.vertex);
    t.children.emplace_back();
    t.children[static_cast<std::size_t>(f.vertex)].push_back(v);
    stack.push_back({v, f.level + 1, 0});
  }
  return t;
}

CMatrix tree_hamiltonian(const RootedTree& tree, const RVector& tau) {
  require(tau.size() == static_cast<Eigen::Index>(tree.boundary.size()),
          "tree_hamiltonian", "one tau entry per boundary site expected");
  int n = tree.vertex_count();
  CMatrix h = CMatrix::Zero(n, n);
  for (int v = 1; v < n; ++v) {
    h(v, tree.parent[static_cast<std::size_t>(v)]) = 1.0;
    h(tree.parent[static_cast<std::size_t>(v)], v) = 1.0;
  }
  for (std::size_t i = 0; i < tree.boundary.size(); ++i)
    h(tree.boundary[i], tree.boundary[i]) = tau[static_cast<Eigen::Index>(i)];
  return h;
}

Complex tree_green_root(const RootedTree& tree, const RVector& tau, Complex z) {
  require(tau.size() == static_cast<Eigen::Index>(tree.boundary.size()),
          "tree_green_root", "one tau entry per boundary site expected");
  int n = tree.vertex_count();
  std::vector<int> tpos(static_cast<std::size_t>(n), -1);
  for (std::size_t i = 0; i < tree.boundary.size(); ++i)
    tpos[static_cast<std::size_t>(tree.boundary[i])] = static_cast<int>(i);
  std::vector<Complex> g(static_cast<std::size_t>(n));
  // Preorder numbering puts every child after its parent, so a reverse sweep
  // is bottom-up.
  for (int v = n; v-- > 0;) {
    Complex den;
    int pos = tpos[static_cast<std::size_t>(v)];
    if (pos >= 0) den = tau[pos] - z;
    else {
      den = -z;
      for (int c : tree.children[static_cast<std::size_t>(v)])
        den -= g[static_cast<std::size_t>(c)];
    }
    if (den == Complex(0.0, 0.0))
      throw std::runtime_error("tree_green_root: recursion pole hit");
    g[static_cast<std::size_t>(v)] = 1.0 / den;
  }
  return g[0];
}

double check_simple(const RootedTree& tree, const RVector& tau) {
  return min_consecutive_gap(tree_eigen(tree, tau, false).values);
}

double check_root_nonvanishing(const RootedTree& tree, const RVector& tau,
                               double gap_tol) {
  TreeEigen eig = tree_eigen(tree, tau, true);
  require(min_consecutive_gap(eig.values) > gap_tol, "check_root_nonvanishing",
          "degenerate spectrum, eigenvectors ambiguous");
  double amp = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < eig.values.size(); ++i)
    amp = std::min(amp, std::abs(eig.vectors(0, i)));
  return amp;
}

double check_sibling_disjoint(const RootedTree& tree, const RVector& tau) {
  const auto& kids = tree.children[0];
  CMatrix h = tree_hamiltonian(tree, tau);
  std::vector<RVector> spectra;
  for (int c : kids) {
    std::vector<int> idx = subtree_vertices(tree, c);
    CMatrix sub(idx.size(), idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < idx.size(); ++j) sub(i, j) = h(idx[i], idx[j]);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(sub, Eigen::EigenvaluesOnly);
    spectra.push_back(es.eigenvalues());
  }
  double sep = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < spectra.size(); ++a)
    for (std::size_t b = a + 1; b < spectra.size(); ++b)
      for (Eigen::Index i = 0; i < spectra[a].size(); ++i)
        for (Eigen::Index j = 0; j < spectra[b].size(); ++j)
          sep = std::min(sep, std::abs(spectra[a][i] - spectra[b][j]));
  return sep;
}

std::pair<int, int> count_poles(const RootedTree& tree, const RVector& tau,
                                double amp_tol) {
  TreeEigen eig = tree_eigen(tree, tau, true);
  int count = 0;
  for (Eigen::Index i = 0; i < eig.values.size(); ++i)
    if (std::abs(eig.vectors(0, i)) > amp_tol) ++count;
  return {count, tree.vertex_count()};
}

SimplicityReport simplicity_report(const RootedTree& tree, const RVector& tau,
                                   double gap_tol, double amp_tol) {
  SimplicityReport r;
  r.gap_tol = gap_tol;
  r.amp_tol = amp_tol;
  r.min_gap = check_simple(tree, tau);
  r.sibling_min_separation =
      tree.depth == 0 ? std::numeric_limits<double>::infinity()
                      : check_sibling_disjoint(tree, tau);
  auto [count, expected] = count_poles(tree, tau, amp_tol);
  r.pole_count = count;
  r.expected_pole_count = expected;
  if (r.min_gap > gap_tol) {
    r.min_root_amplitude = check_root_nonvanishing(tree, tau, gap_tol);
    // The derivative check wants h at most a tenth of the gap.
    double h = std::max(std::min(1e-4, r.min_gap / 10.0), 1e-9);
    try {
      r.fh_max_residual = feynman_hellmann_check(tree, tau, 0, h).max_residual;
    } catch (const std::runtime_error&) {
      r.fh_max_residual = std::numeric_limits<double>::infinity();
    }
  }
  r.verdict = r.min_gap > gap_tol && r.min_root_amplitude > amp_tol &&
              r.sibling_min_separation > gap_tol && r.pole_count == r.expected_pole_count;
  return r;
}

PropagationVerdict zero_boundary_propagation(const RootedTree& tree, const RVector& tau,
                                             const CVector& psi, double e_real,
                                             double amp_tol, bool force) {
  require(psi.size() == tree.vertex_count(), "zero_boundary_propagation",
          "psi dimension mismatch");
  if (!force) {
    require(std::abs(psi.norm() - 1.0) <= 1e-8, "zero_boundary_propagation",
            "normalized psi expected");
    CMatrix h = tree_hamiltonian(tree, tau);
    require((h * psi - e_real * psi).norm() <= 1e-10, "zero_boundary_propagation",
            "not an eigenpair at 1e-10");
  }
  PropagationVerdict v;
  if (!force) {
    for (int x : tree.boundary)
      if (std::abs(psi[x]) > amp_tol) {
        v.witness = x;
        return v;
      }
  }
  // All boundary amplitudes vanish. The eigenvalue equation at a boundary
  // site reads psi_parent + tau psi = E psi, so the parents vanish too; at an
  // interior site with vanishing value and children the same equation kills
  // its parent. Walk the levels toward the root.
  std::vector<char> zero(static_cast<std::size_t>(tree.vertex_count()), 0);
  for (int x : tree.boundary) {
    zero[static_cast<std::size_t>(x)] = 1;
    if (tree.parent[static_cast<std::size_t>(x)] >= 0)
      zero[static_cast<std::size_t>(tree.parent[static_cast<std::size_t>(x)])] = 1;
  }
  // Reverse preorder visits children before parents.
  for (int x = tree.vertex_count(); x-- > 1;) {
    bool kids_zero = true;
    for (int c : tree.children[static_cast<std::size_t>(x)])
      kids_zero = kids_zero && zero[static_cast<std::size_t>(c)];
    if (zero[static_cast<std::size_t>(x)] && kids_zero)
      zero[static_cast<std::size_t>(tree.parent[static_cast<std::size_t>(x)])] = 1;
  }
  v.zero_vector = std::all_of(zero.begin(), zero.end(), [](char f) { return f != 0; });
  return v;
}

FhReport feynman_hellmann_check(const RootedTree& tree, const RVector& tau,
                                int boundary_pos, double h) {
  require(boundary_pos >= 0 &&
              boundary_pos < static_cast<int>(tree.boundary.size()),
          "feynman_hellmann_check", "boundary position out of range");
  require(h > 0.0, "feynman_hellmann_check", "positive step expected");
  int site = tree.boundary[static_cast<std::size_t>(boundary_pos)];

  TreeEigen base = tree_eigen(tree, tau, true);
  RVector tp = tau, tm = tau;
  tp[boundary_pos] += h;
  tm[boundary_pos] -= h;
  TreeEigen plus = tree_eigen(tree, tp, true);
  TreeEigen minus = tree_eigen(tree, tm, true);

  int n = tree.vertex_count();
  auto track = [&](const TreeEigen& other) {
    std::vector<int> match(static_cast<std::size_t>(n), -1);
    std::vector<char> used(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
      int best = -1;
      double best_ov = 0.0;
      for (int j = 0; j < n; ++j) {
        double ov = std::abs(base.vectors.col(i).dot(other.vectors.col(j)));
        if (ov > best_ov) {
          best_ov = ov;
          best = j;
        }
      }
      if (best < 0 || used[static_cast<std::size_t>(best)])
        throw std::runtime_error(
            "feynman_hellmann_check: eigenvalue tracking failure");
      used[static_cast<std::size_t>(best)] = 1;
      match[static_cast<std::size_t>(i)] = best;
    }
    return match;
  };
  std::vector<int> mp = track(plus);
  std::vector<int> mm = track(minus);

  FhReport r;
  for (int i = 0; i < n; ++i) {
    double ep = plus.values[mp[static_cast<std::size_t>(i)]];
    double em = minus.values[mm[static_cast<std::size_t>(i)]];
    double fd = (ep - em) / (2.0 * h);
    double amp2 = std::norm(base.vectors(site, i));
    r.max_residual = std::max(r.max_residual, std::abs(fd - amp2));
    r.curvature = std::max(
        r.curvature, std::abs(ep - 2.0 * base.values[i] + em) / (h * h));
  }
  r.bound = std::max(1e-6, r.curvature * h * h);
  r.ok = r.max_residual <= r.bound;
  return r;
}

namespace {

std::vector<int> graph_neighbors(const CMatrix& adj, int v) {
  std::vector<int> out;
  for (Eigen::Index j = 0; j < adj.cols(); ++j)
    if (j != v && adj(v, j) != Complex(0.0, 0.0)) out.push_back(static_cast<int>(j));
  return out;
}

// Green function <delta_q, (H_comp - z)^{-1} delta_q> of the tree component
// containing q after the block is removed, by the continued-fraction
// recursion g_v = 1/(onsite_v - z - sum over new neighbors of g_w).
Complex component_green(const CMatrix& adj, const std::vector<double>& onsite,
                        const std::vector<char>& blocked, int q, Complex z) {
  struct Frame {
    int v;
    int from;
    bool expanded;
  };
  std::vector<Complex> memo(static_cast<std::size_t>(adj.rows()));
  std::vector<Frame> stack{{q, -1, false}};
  while (!stack.empty()) {
    Frame f = stack.back();
    stack.pop_back();
    std::vector<int> next;
    for (int w : graph_neighbors(adj, f.v))
      if (w != f.from && !blocked[static_cast<std::size_t>(w)]) next.push_back(w);
    if (!f.expanded) {
      stack.push_back({f.v, f.from, true});
      for (int w : next) stack.push_back({w, f.v, false});
    } else {
      Complex den = onsite[static_cast<std::size_t>(f.v)] - z;
      for (int w : next) den -= memo[static_cast<std::size_t>(w)];
      memo[static_cast<std::size_t>(f.v)] = 1.0 / den;
    }
  }
  return memo[static_cast<std::size_t>(q)];
}

}  // namespace

CanopyBoundaryReport canopy_boundary_check(const ModelInstance& canopy, int n,
                                           Complex z) {
  require(canopy.is_assembled(), "canopy_boundary_check", "assembled model expected");
  require(z.imag() != 0.0, "canopy_boundary_check", "z off the real axis expected");
  require(n >= 0 && n < canopy.block_count(), "canopy_boundary_check",
          "block index out of range");
  const CMatrix& adj = canopy.a.entries;
  const std::vector<int>& supp = canopy.blocks[static_cast<std::size_t>(n)].support;
  int dim = canopy.dim();

  std::vector<char> in_block(static_cast<std::size_t>(dim), 0);
  for (int s : supp) in_block[static_cast<std::size_t>(s)] = 1;
  std::vector<double> onsite(static_cast<std::size_t>(dim), 0.0);
  for (int m = 0; m < canopy.block_count(); ++m)
    for (int s : canopy.blocks[static_cast<std::size_t>(m)].support)
      onsite[static_cast<std::size_t>(s)] = canopy.omega[m];

  CanopyBoundaryReport rep;
  rep.coupling = schur_green(canopy, n, z).coupling;
  for (Eigen::Index i = 0; i < rep.coupling.rows(); ++i)
    for (Eigen::Index j = 0; j < rep.coupling.cols(); ++j)
      if (i != j)
        rep.off_diagonal_max = std::max(rep.off_diagonal_max,
                                        std::abs(rep.coupling(i, j)));

  // Complement resolvent, for the cross-term check.
  std::vector<int> comp;
  for (int v = 0; v < dim; ++v)
    if (!in_block[static_cast<std::size_t>(v)]) comp.push_back(v);
  CMatrix hc(comp.size(), comp.size());
  for (std::size_t i = 0; i < comp.size(); ++i)
    for (std::size_t j = 0; j < comp.size(); ++j)
      hc(i, j) = canopy.assembled(comp[i], comp[j]);
  hc -= z * CMatrix::Identity(hc.rows(), hc.cols());
  CMatrix gc = hc.inverse();
  std::vector<int> comp_pos(static_cast<std::size_t>(dim), -1);
  for (std::size_t i = 0; i < comp.size(); ++i)
    comp_pos[static_cast<std::size_t>(comp[i])] = static_cast<int>(i);

  // Boundary pairs (p, q) with p in the block and q adjacent outside; this
  // includes the upward pair at the block root, whose component is the rest
  // of the graph above.
  std::vector<int> hang;  // the outside endpoint of each pair
  for (std::size_t pos = 0; pos < supp.size(); ++pos) {
    Complex expected = 0.0;
    for (int q : graph_neighbors(adj, supp[pos]))
      if (!in_block[static_cast<std::size_t>(q)]) {
        hang.push_back(q);
        ++rep.boundary_pairs;
        expected += component_green(adj, onsite, in_block, q, z);
      }
    rep.cf_max_error = std::max(rep.cf_max_error,
                                std::abs(rep.coupling(pos, pos) - expected));
  }
  for (std::size_t a = 0; a < hang.size(); ++a)
    for (std::size_t b = a + 1; b < hang.size(); ++b)
      rep.cross_green_max = std::max(
          rep.cross_green_max,
          std::abs(gc(comp_pos[static_cast<std::size_t>(hang[a])],
                      comp_pos[static_cast<std::size_t>(hang[b])])));
  return rep;
}

}  // namespace specmult
