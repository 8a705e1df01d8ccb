#include "doctest.h"

#include <limits>
#include <vector>

#include "specmult/exact_rational.hpp"
#include "specmult/linalg.hpp"

using namespace specmult;
using namespace specmult::exact;

namespace {

GRat gr(long num, long den) { return GRat(Rat(BigInt(num), BigInt(den))); }

Matrix real_matrix(std::initializer_list<std::initializer_list<GRat>> rows) {
  Matrix m;
  for (const auto& r : rows) m.emplace_back(r);
  return m;
}

}  // namespace

TEST_CASE("dyadic doubles embed exactly and round trip") {
  Rat half = rat_from_double(0.5);
  CHECK(half.num == 1);
  CHECK(half.den == 2);
  Rat tenth = rat_from_double(0.1);
  CHECK(tenth.num == BigInt("3602879701896397"));
  CHECK(tenth.den == BigInt("36028797018963968"));
  for (double x : {1.0, -0.75, 1.0 / 3.0, 1e-300, 12345.6789, -2.5e17}) {
    CHECK(rat_to_double(rat_from_double(x)) == x);
  }
  CHECK(rat_from_double(0.0).num == 0);
  CHECK_THROWS_AS(rat_from_double(std::numeric_limits<double>::infinity()),
                  std::invalid_argument);
}

TEST_CASE("rational and gaussian arithmetic normalizes") {
  Rat a(BigInt(2), BigInt(4));
  CHECK(a.num == 1);
  CHECK(a.den == 2);
  Rat b(BigInt(1), BigInt(-3));
  CHECK(b.num == -1);
  CHECK(b.den == 3);
  CHECK((a + b) == Rat(BigInt(1), BigInt(6)));
  CHECK((a * b) == Rat(BigInt(-1), BigInt(6)));
  CHECK((a / b) == Rat(BigInt(-3), BigInt(2)));

  // (1+2i)/(3-i) = (1+7i)/10
  GRat q = GRat(Rat(1), Rat(2)) / GRat(Rat(3), Rat(-1));
  CHECK(q.re == Rat(BigInt(1), BigInt(10)));
  CHECK(q.im == Rat(BigInt(7), BigInt(10)));
}

TEST_CASE("2x2 resolvent solve is exact") {
  // (A - 3I)^-1 for A = [[0,1],[1,0]] is [[-3,-1],[-1,-3]]/8.
  Matrix m = real_matrix({{gr(-3, 1), gr(1, 1)}, {gr(1, 1), gr(-3, 1)}});
  Matrix id = real_matrix({{gr(1, 1), gr(0, 1)}, {gr(0, 1), gr(1, 1)}});
  Matrix g = solve(m, id);
  CHECK(g[0][0] == gr(-3, 8));
  CHECK(g[0][1] == gr(-1, 8));
  CHECK(g[1][0] == gr(-1, 8));
  CHECK(g[1][1] == gr(-3, 8));
}

TEST_CASE("singular solve throws") {
  Matrix m = real_matrix({{gr(1, 1), gr(2, 1)}, {gr(2, 1), gr(4, 1)}});
  Matrix id = real_matrix({{gr(1, 1), gr(0, 1)}, {gr(0, 1), gr(1, 1)}});
  CHECK_THROWS_AS(solve(m, id), std::runtime_error);
}

TEST_CASE("determinants match hand values") {
  CHECK(det(real_matrix({{gr(1, 1), gr(2, 1)}, {gr(3, 1), gr(4, 1)}})) == gr(-2, 1));

  // det [[i,1],[1,i]] = -2
  Matrix gi = {{GRat(Rat(0), Rat(1)), gr(1, 1)}, {gr(1, 1), GRat(Rat(0), Rat(1))}};
  CHECK(det(gi) == gr(-2, 1));

  // 3x3 Hilbert determinant is 1/2160.
  Matrix h(3, std::vector<GRat>(3));
  for (long i = 0; i < 3; ++i)
    for (long j = 0; j < 3; ++j) h[i][j] = gr(1, i + j + 1);
  CHECK(det(h) == gr(1, 2160));
}

TEST_CASE("rank of rational matrices") {
  CHECK(rank(real_matrix({{gr(1, 1), gr(2, 1)}, {gr(2, 1), gr(4, 1)}})) == 1);
  CHECK(rank(real_matrix({{gr(1, 1), gr(0, 1)}, {gr(0, 1), gr(0, 1)}})) == 1);
  CHECK(rank(real_matrix({{gr(1, 2), gr(0, 1)}, {gr(0, 1), gr(7, 3)}})) == 2);
  CHECK(rank(Matrix(2, std::vector<GRat>(2))) == 0);
}

TEST_CASE("characteristic polynomials are exact") {
  // det(M - xI) for M = [[0,1],[1,0]] is x^2 - 1.
  Matrix m = real_matrix({{gr(0, 1), gr(1, 1)}, {gr(1, 1), gr(0, 1)}});
  Poly p = char_poly(m);
  REQUIRE(p.size() == 3);
  CHECK(p[0] == gr(-1, 1));
  CHECK(p[1] == gr(0, 1));
  CHECK(p[2] == gr(1, 1));

  // diag(1,1,5): det(M - xI) = -(x-1)^2 (x-5) = -x^3 + 7x^2 - 11x + 5.
  Matrix d3 = real_matrix({{gr(1, 1), gr(0, 1), gr(0, 1)},
                           {gr(0, 1), gr(1, 1), gr(0, 1)},
                           {gr(0, 1), gr(0, 1), gr(5, 1)}});
  Poly p3 = char_poly(d3);
  REQUIRE(p3.size() == 4);
  CHECK(p3[0] == gr(5, 1));
  CHECK(p3[1] == gr(-11, 1));
  CHECK(p3[2] == gr(7, 1));
  CHECK(p3[3] == gr(-1, 1));
}

TEST_CASE("exact gcd chain counts multiplicities") {
  // (x-1)^3 = x^3 - 3x^2 + 3x - 1
  Poly cubed = {gr(-1, 1), gr(3, 1), gr(-3, 1), gr(1, 1)};
  CHECK(gcd_chain_degrees(cubed) == std::vector<int>{3, 2, 1, 0});
  CHECK(max_root_multiplicity(cubed) == 3);

  // (x-1)^2 (x-2) = x^3 - 4x^2 + 5x - 2
  Poly dbl = {gr(-2, 1), gr(5, 1), gr(-4, 1), gr(1, 1)};
  CHECK(gcd_chain_degrees(dbl) == std::vector<int>{3, 1, 0});
  CHECK(max_root_multiplicity(dbl) == 2);

  // squarefree (x-1)(x-2) = x^2 - 3x + 2
  Poly sf = {gr(2, 1), gr(-3, 1), gr(1, 1)};
  CHECK(gcd_chain_degrees(sf) == std::vector<int>{2, 0});
  CHECK(max_root_multiplicity(sf) == 1);

  // x^2 (x-1): the zero root is an ordinary root for the chain.
  Poly z2 = {gr(0, 1), gr(0, 1), gr(-1, 1), gr(1, 1)};
  CHECK(max_root_multiplicity(z2) == 2);

  // degree 1
  Poly lin = {gr(4, 1), gr(1, 1)};
  CHECK(max_root_multiplicity(lin) == 1);
}

TEST_CASE("exact solve agrees with float inverse on a dyadic matrix") {
  CMatrix a(4, 4);
  a << 2.0, 0.5, 0.0, Complex(0.0, 1.0), 0.5, -1.0, 0.25, 0.0, 0.0, 0.25, 3.0, -0.5,
      Complex(0.0, -1.0), 0.0, -0.5, 0.75;
  REQUIRE(is_exactly_hermitian(a));
  CMatrix shifted = a - 9.0 * CMatrix::Identity(4, 4);

  Matrix m = matrix_from_cmatrix(shifted);
  Matrix id(4, std::vector<GRat>(4));
  for (int i = 0; i < 4; ++i) id[i][i] = GRat(1);
  CMatrix exact_inv = matrix_to_cmatrix(solve(m, id));
  CMatrix float_inv = shifted.inverse();
  CHECK((exact_inv - float_inv).norm() < 1e-12);
}
