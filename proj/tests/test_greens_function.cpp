#include "doctest.h"

#include <cmath>

#include "specmult/greens_function.hpp"
#include "specmult/rng.hpp"

using namespace specmult;

namespace {

// One-block model over all sites with C = I and a prescribed background.
ModelInstance whole_space_model(CMatrix a, double omega_val) {
  ModelInstance m;
  const int dim = static_cast<int>(a.rows());
  for (int i = 0; i < dim; ++i) m.sites.labels.push_back("s" + std::to_string(i));
  m.a = HermitianOperator(std::move(a));
  std::vector<int> support(static_cast<std::size_t>(dim));
  for (int i = 0; i < dim; ++i) support[static_cast<std::size_t>(i)] = i;
  m.blocks.push_back(make_block(0, support, CMatrix::Identity(dim, dim)));
  m.disorder = {"uniform", {0.0, 1.0}, 0};
  RVector w(1);
  w << omega_val;
  return with_omega(std::move(m), w);
}

ModelInstance seeded(ModelInstance m, std::uint64_t seed, std::uint64_t index = 0) {
  m.disorder.seed = seed;
  return with_disorder(std::move(m), index);
}

}  // namespace

TEST_CASE("green_block: frozen 2x2 value at z=i") {
  CMatrix a(2, 2);
  a << 0, 1, 1, 0;
  ModelInstance m = whole_space_model(a, 0.0);
  GreenBlock g = green_block(m, 0, 0, Complex(0, 1));
  // (A - i)^{-1} = (A + i)/2 because A^2 = I.
  CHECK(std::abs(g.matrix(0, 0) - Complex(0.0, 0.5)) < 1e-14);
  CHECK(std::abs(g.matrix(0, 1) - Complex(0.5, 0.0)) < 1e-14);
  CHECK(std::abs(g.matrix(1, 0) - Complex(0.5, 0.0)) < 1e-14);
  CHECK(std::abs(g.matrix(1, 1) - Complex(0.0, 0.5)) < 1e-14);
}

TEST_CASE("green_block: pure point scalar model") {
  ModelInstance m = whole_space_model(CMatrix::Zero(2, 2), 1.5);
  const Complex z(0.4, 0.7);
  GreenBlock g = green_block(m, 0, 0, z);
  const Complex expect = 1.0 / (1.5 - z);
  CHECK((g.matrix - expect * CMatrix::Identity(2, 2)).norm() < 1e-14);
}

TEST_CASE("green_block: Hermitian at real energies outside the spectrum") {
  ModelInstance m = seeded(build_strip(6, 2), 21);
  GreenBlock g = green_block(m, 1, 1, Complex(-10.0, 0.0));
  CHECK((g.matrix - g.matrix.adjoint()).norm() < 1e-12);
}

TEST_CASE("green_block: rejects real z on the spectrum") {
  ModelInstance m = whole_space_model(CMatrix::Zero(2, 2), 1.5);
  CHECK_THROWS_AS(green_block(m, 0, 0, Complex(1.5, 0.0)), std::invalid_argument);
}

TEST_CASE("green solve residual meets the absolute bound at moderate z") {
  ModelInstance m = seeded(build_shell_model(2, 2), 5);
  const Complex z(0.3, 2.0);
  ResolventSolver solver(m, z);
  for (int n = 0; n < m.block_count(); ++n) {
    const CMatrix b = embedded_basis(m, n);
    const CMatrix x = solver.solved_basis(n);
    CHECK((m.assembled * x - z * x - b).norm() <= 1e-10);
  }
}

TEST_CASE("Herglotz property and reflection symmetry across builders") {
  const Complex zs[] = {{0.3, 0.5}, {-1.2, 0.05}, {2.0, 1.0}};
  int checked = 0;
  for (const ModelInstance& base :
       {build_strip(5, 2), build_shell_model(2, 1), build_nested_model(2),
        build_canopy_bethe(3, 2, 3)}) {
    ModelInstance m = seeded(base, 33 + checked);
    for (const Complex& z : zs) {
      ResolventSolver up(m, z);
      ResolventSolver down(m, std::conj(z));
      for (int n = 0; n < m.block_count(); ++n) {
        const CMatrix gnn = up.block(n, n);
        Eigen::SelfAdjointEigenSolver<CMatrix> es(antiherm_part(gnn),
                                                  Eigen::EigenvaluesOnly);
        CHECK(es.eigenvalues().minCoeff() >= -1e-10);
        for (int mm = 0; mm < m.block_count(); ++mm) {
          CHECK((down.block(n, mm) - up.block(mm, n).adjoint()).norm() <= 1e-10);
        }
      }
    }
    ++checked;
  }
  CHECK(checked == 4);
}

TEST_CASE("strip blocks are scalar: G_nn(z) = f(z) I") {
  ModelInstance m = seeded(build_strip(8, 3), 44);
  for (const Complex& z : {Complex(0.2, 0.4), Complex(-1.0, 1.5)}) {
    ResolventSolver solver(m, z);
    for (int n = 0; n < m.block_count(); ++n) {
      const CMatrix g = solver.block(n, n);
      const Complex f = g.trace() / 3.0;
      CHECK((g - f * CMatrix::Identity(3, 3)).norm() <= 1e-8 * g.norm());
    }
  }
}

TEST_CASE("boundary_value: matches the real-axis evaluation away from the spectrum") {
  ModelInstance m = seeded(build_strip(5, 2), 55);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m.assembled, Eigen::EigenvaluesOnly);
  const double e = es.eigenvalues().minCoeff() - 1.0;
  BoundaryValue bv = boundary_value(m, 1, 1, e, +1);
  CHECK(bv.converged);
  CHECK_FALSE(bv.diverging);
  GreenBlock direct = green_block(m, 1, 1, Complex(e, 0.0));
  CHECK((bv.limit.matrix - direct.matrix).norm() <= 1e-8);
}

TEST_CASE("boundary_value: weighted atom is rejected, near-pole runs flag divergence") {
  CMatrix a(2, 2);
  a << 0, 0, 0, 5;
  ModelInstance m;
  m.sites.labels = {"s0", "s1"};
  m.a = HermitianOperator(a);
  m.blocks.push_back(make_block(0, {0}, CMatrix::Identity(1, 1)));
  m.blocks.push_back(make_block(1, {1}, CMatrix::Identity(1, 1)));
  m.disorder = {"uniform", {0.0, 1.0}, 0};
  m = with_omega(std::move(m), RVector::Zero(2));

  CHECK_THROWS_AS(boundary_value(m, 0, 0, 0.0, +1), AtomProximityError);

  // Just off the atom: the limit exists but the run walks up the pole first.
  const double e = 1e-6;
  BoundaryValue bv = boundary_value(m, 0, 0, e, +1);
  CHECK(bv.diverging);
  // Rank-one pole model: G_00 -> 1/(0 - e).
  CHECK(std::abs(bv.limit.matrix(0, 0) - Complex(-1.0 / e, 0.0)) <= 1e-2 / e);

  // Atom weighted only in the other block: the (0,0) limit is clean.
  BoundaryValue clean = boundary_value(m, 0, 0, 5.0 - 2.0, +1);
  CHECK(clean.converged);

  // Midgap: both sides agree and the limit is Hermitian.
  BoundaryValue up = boundary_value(m, 0, 0, 2.5, +1);
  BoundaryValue dn = boundary_value(m, 0, 0, 2.5, -1);
  CHECK(up.converged);
  CHECK((up.limit.matrix - dn.limit.matrix).norm() <= 1e-8);
  CHECK((up.limit.matrix - up.limit.matrix.adjoint()).norm() <= 1e-8);
}

TEST_CASE("rank update: lambda = 0 reproduces the base blocks exactly") {
  ModelInstance m = seeded(build_strip(4, 2), 66);
  RankUpdateReport rep = rank_update_check(m, 2, 0.0, Complex(0.3, 0.5));
  CHECK(rep.res_factorized == 0.0);
  CHECK(rep.res_offdiag == 0.0);
  CHECK(rep.res_inverse_pair == 0.0);
  CHECK(rep.res_second_order == 0.0);
}

TEST_CASE("rank update: scalar model solves the identities in closed form") {
  ModelInstance m = whole_space_model(CMatrix::Zero(1, 1), 0.4);
  RankUpdateReport rep = rank_update_check(m, 0, 0.6, Complex(0.3, 0.5));
  CHECK(rep.max() <= 1e-14);
  CHECK(rep.det_guard > 0.1);
}

TEST_CASE("rank update: residuals stay below 1e-9 on builder models") {
  int instances = 0;
  for (const ModelInstance& base :
       {build_strip(6, 2), build_shell_model(2, 2), build_canopy_bethe(3, 3, 2)}) {
    for (std::uint64_t s = 0; s < 3; ++s) {
      ModelInstance m = seeded(base, 700 + s, s);
      const int p = static_cast<int>(s) % m.block_count();
      RankUpdateReport rep =
          rank_update_check(m, p, 0.7 + 0.1 * static_cast<double>(s), Complex(0.3, 0.5));
      CHECK(rep.max() <= 1e-9);
      ++instances;
    }
  }
  CHECK(instances == 9);
}

TEST_CASE("adjoint symmetry: gap energies have a full kernel and tiny residual") {
  ModelInstance m = seeded(build_strip(4, 2), 77);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m.assembled, Eigen::EigenvaluesOnly);
  // Largest spectral gap interior point.
  double best_gap = 0.0, e = 0.0;
  for (Eigen::Index i = 0; i + 1 < es.eigenvalues().size(); ++i) {
    const double gap = es.eigenvalues()(i + 1) - es.eigenvalues()(i);
    if (gap > best_gap) {
      best_gap = gap;
      e = 0.5 * (es.eigenvalues()(i) + es.eigenvalues()(i + 1));
    }
  }
  REQUIRE(best_gap > 0.1);
  AdjointSymmetryReport rep = adjoint_symmetry_check(m, 0, 2, e, +1);
  CHECK_FALSE(rep.vacuous);
  CHECK(rep.kernel_dim == m.blocks[2].rank);
  CHECK(rep.residual <= 1e-8);
}

TEST_CASE("adjoint symmetry: full-weight atom is vacuous, partial weight is checked") {
  // Full weight: single-site block whose atom exhausts the block.
  CMatrix a(2, 2);
  a << 0, 0, 0, 5;
  ModelInstance m;
  m.sites.labels = {"s0", "s1"};
  m.a = HermitianOperator(a);
  m.blocks.push_back(make_block(0, {0}, CMatrix::Identity(1, 1)));
  m.blocks.push_back(make_block(1, {1}, CMatrix::Identity(1, 1)));
  m.disorder = {"uniform", {0.0, 1.0}, 0};
  m = with_omega(std::move(m), RVector::Zero(2));
  AdjointSymmetryReport rep = adjoint_symmetry_check(m, 1, 0, 0.0, +1);
  CHECK(rep.vacuous);

  // Partial weight: rank-2 block, the atom touches one direction only.
  CMatrix a3(3, 3);
  a3 << 1.0, 0.0, 0.5,  //
      0.0, 2.0, 0.5,    //
      0.5, 0.5, 4.0;
  ModelInstance m3;
  m3.sites.labels = {"s0", "s1", "s2"};
  m3.a = HermitianOperator(a3);
  m3.blocks.push_back(make_block(0, {0, 1}, CMatrix::Identity(2, 2)));
  m3.blocks.push_back(make_block(1, {2}, CMatrix::Identity(1, 1)));
  m3.disorder = {"uniform", {0.0, 1.0}, 0};
  m3 = with_omega(std::move(m3), RVector::Zero(2));
  Eigen::SelfAdjointEigenSolver<CMatrix> es3(m3.assembled, Eigen::EigenvaluesOnly);
  AdjointSymmetryReport prep = adjoint_symmetry_check(m3, 1, 0, es3.eigenvalues()(0), +1);
  CHECK_FALSE(prep.vacuous);
  CHECK(prep.kernel_dim >= 1);
  CHECK(prep.residual <= 1e-8);
}

TEST_CASE("schur form: decoupled blocks invert directly and coupling vanishes") {
  // Two decoupled columns: A = 0, blocks = columns.
  ModelInstance m;
  m.sites.labels = {"a0", "a1", "b0", "b1"};
  m.a = HermitianOperator(CMatrix::Zero(4, 4));
  m.blocks.push_back(make_block(0, {0, 1}, CMatrix::Identity(2, 2)));
  m.blocks.push_back(make_block(1, {2, 3}, CMatrix::Identity(2, 2)));
  m.disorder = {"uniform", {0.0, 1.0}, 0};
  RVector w(2);
  w << 0.9, -0.4;
  m = with_omega(std::move(m), w);
  const Complex z(0.1, 0.8);
  SchurReport rep = schur_green(m, 0, z);
  CHECK(rep.coupling.norm() == 0.0);
  CHECK((rep.green.matrix - (1.0 / (0.9 - z)) * CMatrix::Identity(2, 2)).norm() < 1e-13);
}

TEST_CASE("schur form: agrees with the direct block and ignores omega_n in the coupling") {
  ModelInstance m = seeded(build_strip(5, 2), 88);
  const Complex z(0.0, 2.0);
  SchurReport rep = schur_green(m, 1, z);
  GreenBlock direct = green_block(m, 1, 1, z);
  CHECK((rep.green.matrix - direct.matrix).norm() <= 1e-10);

  ModelInstance m2 = m;
  RVector w2 = m.omega;
  w2(1) += 1.3;
  m2 = with_omega(std::move(m2), w2);
  SchurReport rep2 = schur_green(m2, 1, z);
  CHECK((rep2.coupling - rep.coupling).norm() <= 1e-12);
  CMatrix shift = rep2.inner - rep.inner;
  CHECK((shift - 1.3 * compressed_c(m, 1)).norm() <= 1e-12);
}

TEST_CASE("det(I + lambda C G_pp) never vanishes for real lambda off the axis") {
  ModelInstance m = seeded(build_strip(6, 2), 99);
  const Complex z(0.4, 0.8);
  ResolventSolver solver(m, z);
  const CMatrix gpp = solver.block(2, 2);
  const CMatrix c = m.blocks[2].c_eigs.asDiagonal();
  RngStream rng(4242, 0);
  double min_abs = 1e300;
  for (int t = 0; t < 1000; ++t) {
    const double lambda = rng.uniform(-5.0, 5.0);
    const CMatrix f = CMatrix::Identity(2, 2) + lambda * c * gpp;
    min_abs = std::min(min_abs, std::abs(f.determinant()));
  }
  CHECK(min_abs > 1e-6);
}
