#pragma once

#include <algorithm>
#include <initializer_list>
#include <vector>

#include "pwflow/scalar.hpp"

// Small dense matrices/vectors templated on the scalar so the same solvers
// run in double and exact rational mode.  Sizes here never exceed ~12.

namespace pwflow {

template <class T>
class Vec {
 public:
  Vec() = default;
  explicit Vec(size_t n, T fill = T(0)) : d_(n, fill) {}
  Vec(std::initializer_list<T> v) : d_(v) {}

  size_t size() const { return d_.size(); }
  T& operator[](size_t i) { return d_[i]; }
  const T& operator[](size_t i) const { return d_[i]; }
  auto begin() const { return d_.begin(); }
  auto end() const { return d_.end(); }

  Vec& operator+=(const Vec& o) {
    for (size_t i = 0; i < d_.size(); ++i) d_[i] += o[i];
    return *this;
  }
  Vec& operator-=(const Vec& o) {
    for (size_t i = 0; i < d_.size(); ++i) d_[i] -= o[i];
    return *this;
  }
  Vec& operator*=(const T& c) {
    for (auto& x : d_) x *= c;
    return *this;
  }
  friend Vec operator+(Vec a, const Vec& b) { return a += b; }
  friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
  friend Vec operator*(const T& c, Vec a) { return a *= c; }
  friend bool operator==(const Vec& a, const Vec& b) { return a.d_ == b.d_; }

  T sum() const {
    T s(0);
    for (const auto& x : d_) s += x;
    return s;
  }
  T dot(const Vec& o) const {
    T s(0);
    for (size_t i = 0; i < d_.size(); ++i) s += d_[i] * o[i];
    return s;
  }
  T max_abs() const {
    T m(0);
    for (const auto& x : d_) m = std::max(m, scalar_traits<T>::abs(x));
    return m;
  }

 private:
  std::vector<T> d_;
};

template <class T>
class Mat {
 public:
  Mat() = default;
  Mat(size_t r, size_t c, T fill = T(0)) : r_(r), c_(c), d_(r * c, fill) {}

  static Mat identity(size_t n) {
    Mat m(n, n);
    for (size_t i = 0; i < n; ++i) m(i, i) = T(1);
    return m;
  }

  size_t rows() const { return r_; }
  size_t cols() const { return c_; }
  T& operator()(size_t i, size_t j) { return d_[i * c_ + j]; }
  const T& operator()(size_t i, size_t j) const { return d_[i * c_ + j]; }

  Mat transposed() const {
    Mat m(c_, r_);
    for (size_t i = 0; i < r_; ++i)
      for (size_t j = 0; j < c_; ++j) m(j, i) = (*this)(i, j);
    return m;
  }

  Vec<T> row(size_t i) const {
    Vec<T> v(c_);
    for (size_t j = 0; j < c_; ++j) v[j] = (*this)(i, j);
    return v;
  }
  Vec<T> col(size_t j) const {
    Vec<T> v(r_);
    for (size_t i = 0; i < r_; ++i) v[i] = (*this)(i, j);
    return v;
  }

  Vec<T> mul(const Vec<T>& v) const {
    Vec<T> out(r_);
    for (size_t i = 0; i < r_; ++i) {
      T s(0);
      for (size_t j = 0; j < c_; ++j) s += (*this)(i, j) * v[j];
      out[i] = s;
    }
    return out;
  }
  // v' * this
  Vec<T> tmul(const Vec<T>& v) const {
    Vec<T> out(c_);
    for (size_t j = 0; j < c_; ++j) {
      T s(0);
      for (size_t i = 0; i < r_; ++i) s += v[i] * (*this)(i, j);
      out[j] = s;
    }
    return out;
  }

  Mat mul(const Mat& o) const {
    Mat out(r_, o.c_);
    for (size_t i = 0; i < r_; ++i)
      for (size_t k = 0; k < c_; ++k) {
        const T& a = (*this)(i, k);
        if (a == T(0)) continue;
        for (size_t j = 0; j < o.c_; ++j) out(i, j) += a * o(k, j);
      }
    return out;
  }

  Mat& operator-=(const Mat& o) {
    for (size_t i = 0; i < d_.size(); ++i) d_[i] -= o.d_[i];
    return *this;
  }
  friend Mat operator-(Mat a, const Mat& b) { return a -= b; }

  T max_abs() const {
    T m(0);
    for (const auto& x : d_) m = std::max(m, scalar_traits<T>::abs(x));
    return m;
  }

  Mat submatrix(const std::vector<size_t>& rows, const std::vector<size_t>& cols) const {
    Mat m(rows.size(), cols.size());
    for (size_t i = 0; i < rows.size(); ++i)
      for (size_t j = 0; j < cols.size(); ++j) m(i, j) = (*this)(rows[i], cols[j]);
    return m;
  }

 private:
  size_t r_ = 0, c_ = 0;
  std::vector<T> d_;
};

// Gaussian elimination with partial pivoting (largest |pivot|); exact in
// rational mode.  Returns false when the system is singular.
template <class T>
bool solve_linear(Mat<T> a, Vec<T> b, Vec<T>& x) {
  const size_t n = a.rows();
  if (a.cols() != n || b.size() != n) throw DimensionError("solve_linear: shape");
  std::vector<size_t> perm(n);
  for (size_t i = 0; i < n; ++i) perm[i] = i;
  for (size_t k = 0; k < n; ++k) {
    size_t piv = k;
    T best = scalar_traits<T>::abs(a(k, k));
    for (size_t i = k + 1; i < n; ++i) {
      T cand = scalar_traits<T>::abs(a(i, k));
      if (cand > best) {
        best = cand;
        piv = i;
      }
    }
    if (best == T(0)) return false;
    if (piv != k) {
      for (size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
      std::swap(b[k], b[piv]);
    }
    for (size_t i = k + 1; i < n; ++i) {
      if (a(i, k) == T(0)) continue;
      T f = a(i, k) / a(k, k);
      a(i, k) = T(0);
      for (size_t j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
      b[i] -= f * b[k];
    }
  }
  x = Vec<T>(n);
  for (size_t ik = n; ik-- > 0;) {
    T s = b[ik];
    for (size_t j = ik + 1; j < n; ++j) s -= a(ik, j) * x[j];
    x[ik] = s / a(ik, ik);
  }
  return true;
}

template <class T>
T determinant(Mat<T> a) {
  const size_t n = a.rows();
  if (a.cols() != n) throw DimensionError("determinant: not square");
  T det(1);
  for (size_t k = 0; k < n; ++k) {
    size_t piv = k;
    T best = scalar_traits<T>::abs(a(k, k));
    for (size_t i = k + 1; i < n; ++i) {
      T cand = scalar_traits<T>::abs(a(i, k));
      if (cand > best) {
        best = cand;
        piv = i;
      }
    }
    if (best == T(0)) return T(0);
    if (piv != k) {
      for (size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
      det = -det;
    }
    det *= a(k, k);
    for (size_t i = k + 1; i < n; ++i) {
      if (a(i, k) == T(0)) continue;
      T f = a(i, k) / a(k, k);
      for (size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
    }
  }
  return det;
}

template <class T>
bool invert(const Mat<T>& a, Mat<T>& inv) {
  const size_t n = a.rows();
  if (a.cols() != n) throw DimensionError("invert: not square");
  inv = Mat<T>(n, n);
  for (size_t j = 0; j < n; ++j) {
    Vec<T> e(n), x;
    e[j] = T(1);
    if (!solve_linear(a, e, x)) return false;
    for (size_t i = 0; i < n; ++i) inv(i, j) = x[i];
  }
  return true;
}

template <class T>
Vec<T> ones(size_t n) {
  return Vec<T>(n, T(1));
}

template <class T>
Vec<T> unit(size_t n, size_t i) {
  Vec<T> v(n);
  v[i] = T(1);
  return v;
}

template <class To, class From>
Vec<To> convert_vec(const Vec<From>& v) {
  Vec<To> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = To(scalar_traits<From>::to_double(v[i]));
  return out;
}

}  // namespace pwflow
