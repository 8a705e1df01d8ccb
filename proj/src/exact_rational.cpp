#include "specmult/exact_rational.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <utility>

namespace specmult::exact {

namespace {

BigInt big_gcd(const BigInt& a, const BigInt& b) {
  return boost::multiprecision::gcd(a, b);
}

}  // namespace

Rat::Rat(BigInt n, BigInt d) : num(std::move(n)), den(std::move(d)) {
  if (den == 0) throw std::invalid_argument("Rat: zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  if (num == 0) {
    den = 1;
    return;
  }
  BigInt g = big_gcd(num < 0 ? BigInt(-num) : num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
}

Rat Rat::operator+(const Rat& o) const {
  return Rat(num * o.den + o.num * den, den * o.den);
}

Rat Rat::operator-(const Rat& o) const {
  return Rat(num * o.den - o.num * den, den * o.den);
}

Rat Rat::operator*(const Rat& o) const { return Rat(num * o.num, den * o.den); }

Rat Rat::operator/(const Rat& o) const {
  if (o.is_zero()) throw std::domain_error("Rat: division by zero");
  return Rat(num * o.den, den * o.num);
}

Rat rat_from_double(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("rat_from_double: non-finite");
  if (x == 0.0) return Rat();
  int exp = 0;
  double mant = std::frexp(x, &exp);
  // 53 mantissa bits make ldexp(mant, 53) an exact integer.
  auto imant = static_cast<long long>(std::ldexp(mant, 53));
  exp -= 53;
  Rat r;
  if (exp >= 0) {
    r.num = BigInt(imant) << exp;
    r.den = 1;
    return r;
  }
  return Rat(BigInt(imant), BigInt(1) << (-exp));
}

double rat_to_double(const Rat& v) {
  return static_cast<double>(boost::multiprecision::cpp_bin_float_oct(v.num) /
                             boost::multiprecision::cpp_bin_float_oct(v.den));
}

GRat GRat::operator/(const GRat& o) const {
  if (o.is_zero()) throw std::domain_error("GRat: division by zero");
  Rat n2 = o.re * o.re + o.im * o.im;
  GRat num = *this * o.conj();
  return {num.re / n2, num.im / n2};
}

GRat grat_from_complex(const Complex& z) {
  return {rat_from_double(z.real()), rat_from_double(z.imag())};
}

Complex grat_to_complex(const GRat& v) {
  return {rat_to_double(v.re), rat_to_double(v.im)};
}

Matrix matrix_from_cmatrix(const CMatrix& m) {
  Matrix out(m.rows(), std::vector<GRat>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = grat_from_complex(m(i, j));
  return out;
}

CMatrix matrix_to_cmatrix(const Matrix& m) {
  CMatrix out(m.size(), m.empty() ? 0 : m[0].size());
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) out(i, j) = grat_to_complex(m[i][j]);
  return out;
}

namespace {

// Gaussian integers; the working type of the fraction-free elimination.
struct GInt {
  BigInt re{0}, im{0};

  bool is_zero() const { return re == 0 && im == 0; }
  GInt operator*(const GInt& o) const {
    return {re * o.re - im * o.im, re * o.im + im * o.re};
  }
  GInt operator-(const GInt& o) const { return {re - o.re, im - o.im}; }
  GInt conj() const { return {re, -im}; }
};

// Exact division; Bareiss guarantees divisibility, so a nonzero remainder is
// a bug, not an input condition.
GInt div_exact(const GInt& a, const GInt& b) {
  BigInt n = b.re * b.re + b.im * b.im;
  if (n == 0) throw std::logic_error("div_exact: zero divisor");
  GInt num = a * b.conj();
  BigInt qr, rr, qi, ri;
  boost::multiprecision::divide_qr(num.re, n, qr, rr);
  boost::multiprecision::divide_qr(num.im, n, qi, ri);
  if (rr != 0 || ri != 0) throw std::logic_error("div_exact: inexact division");
  return {qr, qi};
}

BigInt lcm(const BigInt& a, const BigInt& b) {
  if (a == 0 || b == 0) return 0;
  return a / big_gcd(a, b) * b;
}

struct Cleared {
  std::vector<std::vector<GInt>> rows;
  std::vector<BigInt> scale;  // row i of the input was multiplied by scale[i]
};

// Clears denominators row by row; row scaling leaves the solution of an
// augmented system unchanged.
Cleared clear_rows(const Matrix& m, const Matrix* b) {
  std::size_t n = m.size();
  std::size_t extra = (b && n) ? (*b)[0].size() : 0;
  Cleared out;
  out.rows.resize(n);
  out.scale.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    BigInt d = 1;
    auto fold = [&d](const GRat& v) {
      d = lcm(d, v.re.den);
      d = lcm(d, v.im.den);
    };
    for (const auto& v : m[i]) fold(v);
    if (b)
      for (const auto& v : (*b)[i]) fold(v);
    out.scale[i] = d;
    auto clear = [&d](const GRat& v) {
      return GInt{v.re.num * (d / v.re.den), v.im.num * (d / v.im.den)};
    };
    out.rows[i].reserve(m[i].size() + extra);
    for (const auto& v : m[i]) out.rows[i].push_back(clear(v));
    if (b)
      for (const auto& v : (*b)[i]) out.rows[i].push_back(clear(v));
  }
  return out;
}

// Fraction-free forward elimination on n x (n+extra) rows. Returns the sign
// of the row permutation, or 0 when the leading n x n block is singular.
int bareiss_forward(std::vector<std::vector<GInt>>& rows, std::size_t n) {
  int sign = 1;
  GInt prev{BigInt(1), BigInt(0)};
  for (std::size_t k = 0; k + 1 <= n; ++k) {
    std::size_t piv = k;
    while (piv < n && rows[piv][k].is_zero()) ++piv;
    if (piv == n) return 0;
    if (piv != k) {
      std::swap(rows[piv], rows[k]);
      sign = -sign;
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      for (std::size_t j = k + 1; j < rows[i].size(); ++j)
        rows[i][j] = div_exact(rows[k][k] * rows[i][j] - rows[i][k] * rows[k][j], prev);
      rows[i][k] = GInt{};
    }
    prev = rows[k][k];
  }
  return sign;
}

GRat to_grat(const GInt& v) { return {Rat(v.re, BigInt(1)), Rat(v.im, BigInt(1))}; }

Poly trim(Poly p) {
  while (!p.empty() && p.back().is_zero()) p.pop_back();
  return p;
}

Poly deriv(const Poly& p) {
  Poly d;
  for (std::size_t k = 1; k < p.size(); ++k) d.push_back(p[k] * GRat(long(k)));
  return trim(std::move(d));
}

Poly make_monic(Poly p) {
  p = trim(std::move(p));
  if (p.empty()) return p;
  GRat lead = p.back();
  for (auto& c : p) c = c / lead;
  return p;
}

Poly poly_mod(Poly a, const Poly& b) {
  a = trim(std::move(a));
  while (a.size() >= b.size()) {
    GRat q = a.back() / b.back();
    std::size_t off = a.size() - b.size();
    for (std::size_t j = 0; j < b.size(); ++j) a[off + j] = a[off + j] - q * b[j];
    a.pop_back();
    a = trim(std::move(a));
    if (a.empty()) break;
  }
  return a;
}

Poly poly_gcd(Poly a, Poly b) {
  a = make_monic(std::move(a));
  b = make_monic(std::move(b));
  while (!b.empty()) {
    Poly r = poly_mod(a, b);
    a = std::move(b);
    b = make_monic(std::move(r));
  }
  return a;
}

}  // namespace

Matrix solve(const Matrix& m, const Matrix& b) {
  std::size_t n = m.size();
  if (b.size() != n) throw std::invalid_argument("exact::solve: shape mismatch");
  if (n == 0) return {};
  std::size_t w = b[0].size();
  Cleared sys = clear_rows(m, &b);
  if (bareiss_forward(sys.rows, n) == 0) throw std::runtime_error("singular");
  Matrix x(n, std::vector<GRat>(w));
  for (std::size_t col = 0; col < w; ++col) {
    for (std::size_t i = n; i-- > 0;) {
      GRat acc = to_grat(sys.rows[i][n + col]);
      for (std::size_t j = i + 1; j < n; ++j)
        acc = acc - to_grat(sys.rows[i][j]) * x[j][col];
      x[i][col] = acc / to_grat(sys.rows[i][i]);
    }
  }
  return x;
}

GRat det(const Matrix& m) {
  std::size_t n = m.size();
  if (n == 0) return GRat(1);
  Cleared sys = clear_rows(m, nullptr);
  int sign = bareiss_forward(sys.rows, n);
  if (sign == 0) return GRat();
  // Row scaling multiplied det by prod(scale); the last Bareiss pivot is the
  // determinant of the scaled integer matrix.
  GRat d = to_grat(sys.rows[n - 1][n - 1]);
  if (sign < 0) d = -d;
  BigInt s = 1;
  for (const auto& f : sys.scale) s *= f;
  return d / GRat(Rat(s, BigInt(1)));
}

int rank(const Matrix& m) {
  std::size_t nr = m.size();
  if (nr == 0) return 0;
  std::size_t nc = m[0].size();
  Matrix a = m;
  std::size_t r = 0;
  for (std::size_t c = 0; c < nc && r < nr; ++c) {
    std::size_t piv = r;
    while (piv < nr && a[piv][c].is_zero()) ++piv;
    if (piv == nr) continue;
    std::swap(a[piv], a[r]);
    for (std::size_t i = r + 1; i < nr; ++i) {
      if (a[i][c].is_zero()) continue;
      GRat f = a[i][c] / a[r][c];
      for (std::size_t j = c; j < nc; ++j) a[i][j] = a[i][j] - f * a[r][j];
    }
    ++r;
  }
  return static_cast<int>(r);
}

Poly char_poly(const Matrix& m) {
  std::size_t n = m.size();
  Poly c(n + 1);
  c[n] = GRat(1);
  if (n == 0) return c;
  // Faddeev-LeVerrier: N_1 = M, c_{n-k} = -tr(M N_k)/k applied iteratively.
  Matrix nk = m;
  for (std::size_t k = 1; k <= n; ++k) {
    GRat tr;
    for (std::size_t i = 0; i < n; ++i) tr = tr + nk[i][i];
    GRat ck = -(tr / GRat(long(k)));
    c[n - k] = ck;
    if (k == n) break;
    for (std::size_t i = 0; i < n; ++i) nk[i][i] = nk[i][i] + ck;
    Matrix next(n, std::vector<GRat>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        GRat acc;
        for (std::size_t l = 0; l < n; ++l) acc = acc + m[i][l] * nk[l][j];
        next[i][j] = acc;
      }
    nk = std::move(next);
  }
  // So far c is det(xI - M); flip to det(M - xI) for odd n.
  if (n % 2 == 1)
    for (auto& v : c) v = -v;
  return c;
}

int degree(const Poly& p) {
  Poly t = trim(p);
  return static_cast<int>(t.size()) - 1;
}

std::vector<int> gcd_chain_degrees(Poly p) {
  p = make_monic(std::move(p));
  if (p.empty()) throw std::invalid_argument("gcd_chain_degrees: zero polynomial");
  std::vector<int> degs{static_cast<int>(p.size()) - 1};
  Poly h = p;
  Poly d = p;
  while (h.size() > 1) {
    d = deriv(d);
    h = poly_gcd(h, d);
    degs.push_back(static_cast<int>(h.size()) - 1);
  }
  return degs;
}

int max_root_multiplicity(const Poly& p) {
  return static_cast<int>(gcd_chain_degrees(p).size()) - 1;
}

}  // namespace specmult::exact
