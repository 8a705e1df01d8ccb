#include "specmult/operator_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "specmult/rng.hpp"

namespace specmult {

namespace {

bool exactly_diagonal(const CMatrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (i != j && m(i, j) != Complex(0.0, 0.0)) return false;
  return true;
}

std::string coord_label(const std::vector<int>& xs) {
  std::string s = "(";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(xs[i]);
  }
  return s + ")";
}

}  // namespace

PerturbationBlock make_block(int index, std::vector<int> support, CMatrix c,
                             double rank_tol_rel) {
  const int rs = static_cast<int>(support.size());
  require(rs > 0, "make_block", "empty support");
  require(c.rows() == rs && c.cols() == rs, "make_block", "C size does not match support");
  require(std::is_sorted(support.begin(), support.end()) &&
              std::adjacent_find(support.begin(), support.end()) == support.end(),
          "make_block", "support must be strictly ascending");
  require(is_exactly_hermitian(c), "make_block", "C is not exactly Hermitian");

  PerturbationBlock b;
  b.index = index;
  b.support = std::move(support);
  b.c = std::move(c);

  const double cnorm = op_norm_herm(b.c);
  const double rank_tol = rank_tol_rel * std::max(cnorm, 1e-300);

  if (exactly_diagonal(b.c)) {
    // Coordinate eigenbasis, stable descending sort by (value, site order).
    std::vector<int> idx(rs);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int i, int j) {
      return b.c(i, i).real() > b.c(j, j).real();
    });
    std::vector<int> keep;
    for (int i : idx) {
      const double v = b.c(i, i).real();
      require(v > -rank_tol, "make_block", "C has a negative eigenvalue beyond tolerance");
      if (v > rank_tol) keep.push_back(i);
    }
    b.rank = static_cast<int>(keep.size());
    b.c_eigs = RVector(b.rank);
    b.basis = CMatrix::Zero(rs, b.rank);
    for (int k = 0; k < b.rank; ++k) {
      b.c_eigs(k) = b.c(keep[k], keep[k]).real();
      b.basis(keep[k], k) = 1.0;
    }
  } else {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(b.c);
    require(es.info() == Eigen::Success, "make_block", "eigensolver failed");
    const RVector& ev = es.eigenvalues();  // ascending
    require(ev(0) > -1e-12 * std::max(cnorm, 1.0), "make_block",
            "C has a negative eigenvalue beyond tolerance");
    std::vector<int> keep;
    for (int i = rs - 1; i >= 0; --i)
      if (ev(i) > rank_tol) keep.push_back(i);  // descending
    b.rank = static_cast<int>(keep.size());
    b.c_eigs = RVector(b.rank);
    b.basis = CMatrix(rs, b.rank);
    for (int k = 0; k < b.rank; ++k) {
      b.c_eigs(k) = ev(keep[k]);
      b.basis.col(k) = es.eigenvectors().col(keep[k]);
      fix_phase(b.basis.col(k));
    }
  }
  require(b.rank > 0, "make_block", "C is numerically zero");
  return b;
}

// ---------- builders ----------

ModelInstance build_strip(int length, int fibers, bool vertical_hopping) {
  require(length >= 1, "build_strip", "length must be >= 1");
  require(fibers >= 1, "build_strip", "fibers must be >= 1");
  const int dim = length * fibers;

  ModelInstance m;
  m.sites.labels.reserve(dim);
  for (int x = 0; x < length; ++x)
    for (int y = 0; y < fibers; ++y) m.sites.labels.push_back(coord_label({x, y}));

  CMatrix a = CMatrix::Zero(dim, dim);
  for (int x = 0; x + 1 < length; ++x)
    for (int y = 0; y < fibers; ++y) {
      const int i = x * fibers + y;
      const int j = (x + 1) * fibers + y;
      a(i, j) = 1.0;
      a(j, i) = 1.0;
    }
  if (vertical_hopping)
    for (int x = 0; x < length; ++x)
      for (int y = 0; y + 1 < fibers; ++y) {
        const int i = x * fibers + y;
        const int j = x * fibers + y + 1;
        a(i, j) = 1.0;
        a(j, i) = 1.0;
      }
  m.a = HermitianOperator(std::move(a));

  for (int x = 0; x < length; ++x) {
    std::vector<int> support(fibers);
    for (int y = 0; y < fibers; ++y) support[y] = x * fibers + y;
    m.blocks.push_back(make_block(x, std::move(support), CMatrix::Identity(fibers, fibers)));
  }
  m.disorder = {"uniform", {0.0, 1.0}, 0};
  return m;
}

ModelInstance build_shell_model(int d, int radius) {
  require(d == 1 || d == 2, "build_shell_model", "d must be 1 or 2");
  require(radius >= 0, "build_shell_model", "radius must be >= 0");
  const int side = 2 * radius + 1;
  const int dim = (d == 1) ? side : side * side;

  ModelInstance m;
  m.sites.labels.reserve(dim);
  std::vector<std::vector<int>> coords;
  coords.reserve(dim);
  if (d == 1) {
    for (int x = -radius; x <= radius; ++x) coords.push_back({x});
  } else {
    for (int x = -radius; x <= radius; ++x)
      for (int y = -radius; y <= radius; ++y) coords.push_back({x, y});
  }
  for (const auto& xy : coords) m.sites.labels.push_back(coord_label(xy));

  CMatrix a = CMatrix::Zero(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = i + 1; j < dim; ++j) {
      int dist = 0;
      for (std::size_t k = 0; k < coords[i].size(); ++k)
        dist += std::abs(coords[i][k] - coords[j][k]);
      if (dist == 1) {
        a(i, j) = 1.0;
        a(j, i) = 1.0;
      }
    }
  m.a = HermitianOperator(std::move(a));

  for (int r = 0; r <= radius; ++r) {
    std::vector<int> support;
    for (int i = 0; i < dim; ++i) {
      int ninf = 0;
      for (int v : coords[i]) ninf = std::max(ninf, std::abs(v));
      if (ninf == r) support.push_back(i);
    }
    const int rs = static_cast<int>(support.size());
    m.blocks.push_back(make_block(r, std::move(support), CMatrix::Identity(rs, rs)));
  }
  m.disorder = {"uniform", {0.0, 1.0}, 0};
  return m;
}

ModelInstance build_nested_model(int levels) {
  require(levels >= 1 && levels <= 6, "build_nested_model", "levels must be in 1..6");
  const int rows = 1 << levels;
  const int dim = levels * rows;

  ModelInstance m;
  m.sites.labels.reserve(dim);
  for (int n = 1; n <= levels; ++n)
    for (int y = 0; y < rows; ++y) m.sites.labels.push_back(coord_label({n, y}));

  auto site = [rows](int n, int y) { return (n - 1) * rows + y; };

  CMatrix a = CMatrix::Zero(dim, dim);
  for (int n = 1; n + 1 <= levels; ++n)
    for (int y = 0; y < rows; ++y) {
      a(site(n, y), site(n + 1, y)) = 1.0;
      a(site(n + 1, y), site(n, y)) = 1.0;
    }
  m.a = HermitianOperator(std::move(a));

  int next_index = 0;
  for (int n = 1; n <= levels; ++n) {
    const int width = 1 << n;
    for (int m0 = 0; m0 < rows; m0 += width) {
      std::vector<int> support;
      for (int y = m0; y < m0 + width; ++y) support.push_back(site(n, y));
      m.blocks.push_back(
          make_block(next_index++, std::move(support), CMatrix::Identity(width, width)));
    }
  }
  m.disorder = {"uniform", {0.0, 1.0}, 0};
  return m;
}

ModelInstance build_canopy_bethe(int branching, int depth, int block_depth) {
  require(branching >= 3, "build_canopy_bethe", "branching must be >= 3");
  require(depth >= 0, "build_canopy_bethe", "depth must be >= 0");
  require(block_depth >= 1, "build_canopy_bethe", "block depth must be >= 1");
  require((depth + 1) % block_depth == 0, "build_canopy_bethe",
          "invalid tiling: block depth must divide depth+1");

  // DFS preorder construction; root has `branching` children, every other
  // interior vertex branching-1.
  std::vector<int> parent{-1};
  std::vector<int> vdepth{0};
  std::vector<std::vector<int>> children{{}};
  // Iterative DFS to keep the order canonical.
  struct Frame {
    int vertex;
    int next_child;
  };
  std::vector<Frame> stack{{0, 0}};
  while (!stack.empty()) {
    Frame& f = stack.back();
    const int kids = (vdepth[f.vertex] >= depth)
                         ? 0
                         : (f.vertex == 0 ? branching : branching - 1);
    if (f.next_child >= kids) {
      stack.pop_back();
      continue;
    }
    ++f.next_child;
    const int v = static_cast<int>(parent.size());
    parent.push_back(f.vertex);
    vdepth.push_back(vdepth[f.vertex] + 1);
    children[f.vertex].push_back(v);
    children.push_back({});
    stack.push_back({v, 0});
  }
  const int dim = static_cast<int>(parent.size());

  ModelInstance m;
  m.sites.labels.reserve(dim);
  for (int v = 0; v < dim; ++v) m.sites.labels.push_back("v" + std::to_string(v));

  CMatrix a = CMatrix::Zero(dim, dim);
  for (int v = 1; v < dim; ++v) {
    a(v, parent[v]) = 1.0;
    a(parent[v], v) = 1.0;
  }
  m.a = HermitianOperator(std::move(a));

  // Forward subtree of depth block_depth at every vertex whose depth is a
  // multiple of block_depth.
  int next_index = 0;
  for (int v = 0; v < dim; ++v) {
    if (vdepth[v] % block_depth != 0) continue;
    std::vector<int> support;
    std::vector<int> frontier{v};
    for (int off = 0; off < block_depth && !frontier.empty(); ++off) {
      std::vector<int> next;
      for (int u : frontier) {
        support.push_back(u);
        for (int c : children[u]) next.push_back(c);
      }
      frontier = std::move(next);
    }
    std::sort(support.begin(), support.end());
    const int rs = static_cast<int>(support.size());
    m.blocks.push_back(
        make_block(next_index++, std::move(support), CMatrix::Identity(rs, rs)));
  }
  m.disorder = {"uniform", {0.0, 1.0}, 0};
  return m;
}

// ---------- operations ----------

RVector sample_disorder(const DisorderSpec& spec, int count, std::uint64_t sample_index) {
  require(count >= 0, "sample_disorder", "negative count");
  RngStream rng(spec.seed, sample_index);
  RVector omega(count);
  if (spec.family == "uniform") {
    require(spec.params.size() == 2 && spec.params[0] <= spec.params[1], "sample_disorder",
            "uniform disorder needs params {lo, hi} with lo <= hi");
    for (int n = 0; n < count; ++n) omega(n) = rng.uniform(spec.params[0], spec.params[1]);
  } else if (spec.family == "gaussian") {
    require(spec.params.size() == 2 && spec.params[1] >= 0.0, "sample_disorder",
            "gaussian disorder needs params {mean, sigma} with sigma >= 0");
    for (int n = 0; n < count; ++n) omega(n) = rng.gaussian(spec.params[0], spec.params[1]);
  } else {
    throw std::invalid_argument("sample_disorder: unknown family '" + spec.family + "'");
  }
  return omega;
}

ModelInstance with_omega(ModelInstance model, RVector omega) {
  require(omega.size() == static_cast<Eigen::Index>(model.blocks.size()), "with_omega",
          "omega length does not match block count");
  model.omega = std::move(omega);
  CMatrix acc = model.a.entries;
  for (std::size_t n = 0; n < model.blocks.size(); ++n) {
    const PerturbationBlock& b = model.blocks[n];
    const double w = model.omega(static_cast<Eigen::Index>(n));
    const int rs = static_cast<int>(b.support.size());
    for (int i = 0; i < rs; ++i)
      for (int j = 0; j < rs; ++j) acc(b.support[i], b.support[j]) += w * b.c(i, j);
  }
  require(is_exactly_hermitian(acc), "with_omega", "assembly broke Hermiticity");
  model.assembled = std::move(acc);
  return model;
}

ModelInstance with_disorder(ModelInstance model, std::uint64_t sample_index) {
  RVector omega = sample_disorder(model.disorder, model.block_count(), sample_index);
  return with_omega(std::move(model), std::move(omega));
}

PartitionReport verify_partition(const ModelInstance& model, double tol) {
  const int dim = model.dim();
  CMatrix acc = CMatrix::Zero(dim, dim);
  for (int n = 0; n < model.block_count(); ++n) {
    const CMatrix b = embedded_basis(model, n);
    acc += b * b.adjoint();
  }
  acc -= CMatrix::Identity(dim, dim);
  PartitionReport rep;
  rep.defect = op_norm_herm(acc);
  rep.ok = rep.defect <= tol;
  return rep;
}

CMatrix embedded_basis(const ModelInstance& model, int n) {
  require(n >= 0 && n < model.block_count(), "embedded_basis", "block index out of range");
  const PerturbationBlock& b = model.blocks[static_cast<std::size_t>(n)];
  CMatrix out = CMatrix::Zero(model.dim(), b.rank);
  for (std::size_t i = 0; i < b.support.size(); ++i)
    out.row(b.support[i]) = b.basis.row(static_cast<Eigen::Index>(i));
  return out;
}

CMatrix embedded_c(const ModelInstance& model, int n) {
  require(n >= 0 && n < model.block_count(), "embedded_c", "block index out of range");
  const PerturbationBlock& b = model.blocks[static_cast<std::size_t>(n)];
  CMatrix out = CMatrix::Zero(model.dim(), model.dim());
  const int rs = static_cast<int>(b.support.size());
  for (int i = 0; i < rs; ++i)
    for (int j = 0; j < rs; ++j) out(b.support[i], b.support[j]) = b.c(i, j);
  return out;
}

CMatrix compressed_c(const ModelInstance& model, int n) {
  require(n >= 0 && n < model.block_count(), "compressed_c", "block index out of range");
  const PerturbationBlock& b = model.blocks[static_cast<std::size_t>(n)];
  return b.basis.adjoint() * b.c * b.basis;
}

}  // namespace specmult
