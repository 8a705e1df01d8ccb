#pragma once

// Exact linear algebra over Gaussian rationals: fraction-free (Bareiss)
// elimination on denominator-cleared Gaussian integers, exact characteristic
// polynomials, and exact gcd chains for root multiplicities. Doubles embed
// exactly (they are dyadic rationals), so the float pipeline and this one can
// be run on bit-identical inputs.

#include <boost/multiprecision/cpp_int.hpp>

#include <stdexcept>
#include <vector>

#include "specmult/linalg.hpp"

namespace specmult::exact {

using BigInt = boost::multiprecision::cpp_int;

// Rational with explicit numerator/denominator kept in lowest terms.
struct Rat {
  BigInt num{0};
  BigInt den{1};

  Rat() = default;
  Rat(long v) : num(v) {}
  Rat(BigInt n, BigInt d);

  Rat operator+(const Rat& o) const;
  Rat operator-(const Rat& o) const;
  Rat operator*(const Rat& o) const;
  Rat operator/(const Rat& o) const;
  Rat operator-() const { return Rat(-num, den); }
  bool operator==(const Rat& o) const { return num == o.num && den == o.den; }
  bool is_zero() const { return num == 0; }
};

Rat rat_from_double(double x);  // exact dyadic expansion; throws on non-finite
double rat_to_double(const Rat& v);

// Gaussian rational a + b*i.
struct GRat {
  Rat re, im;

  GRat() = default;
  GRat(Rat r) : re(std::move(r)) {}
  GRat(Rat r, Rat i) : re(std::move(r)), im(std::move(i)) {}
  GRat(long v) : re(v) {}

  GRat operator+(const GRat& o) const { return {re + o.re, im + o.im}; }
  GRat operator-(const GRat& o) const { return {re - o.re, im - o.im}; }
  GRat operator*(const GRat& o) const {
    return {re * o.re - im * o.im, re * o.im + im * o.re};
  }
  GRat operator/(const GRat& o) const;
  GRat operator-() const { return {-re, -im}; }
  GRat conj() const { return {re, Rat(0) - im}; }
  bool operator==(const GRat& o) const { return re == o.re && im == o.im; }
  bool is_zero() const { return re.is_zero() && im.is_zero(); }
};

GRat grat_from_complex(const Complex& z);
Complex grat_to_complex(const GRat& v);

using Matrix = std::vector<std::vector<GRat>>;
using Poly = std::vector<GRat>;  // ascending coefficients

Matrix matrix_from_cmatrix(const CMatrix& m);
CMatrix matrix_to_cmatrix(const Matrix& m);

// Exact solve M X = B via fraction-free elimination. Throws
// std::runtime_error("singular") when det M = 0.
Matrix solve(const Matrix& m, const Matrix& b);
GRat det(const Matrix& m);
int rank(const Matrix& m);

// det(M - x I), leading coefficient (-1)^n (Faddeev-LeVerrier, exact).
Poly char_poly(const Matrix& m);

int degree(const Poly& p);  // -1 for the zero polynomial

// Exact Euclidean gcd chain p, gcd(p,p'), gcd(.,p''), ...; returns the degree
// sequence ending at the first constant. Max root multiplicity = number of
// gcd steps taken = chain length - 1.
std::vector<int> gcd_chain_degrees(Poly p);
int max_root_multiplicity(const Poly& p);

}  // namespace specmult::exact
