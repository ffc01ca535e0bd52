#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

#include "pelab/errors.hpp"

namespace pelab {

// Dense row-major matrix. Deliberately minimal: the library only needs
// storage, element access, and the handful of GEMM variants below.
template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T value = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, value) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }
  const T& operator()(std::size_t r, std::size_t c) const {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }

  T* row(std::size_t r) { return data_.data() + r * cols_; }
  const T* row(std::size_t r) const { return data_.data() + r * cols_; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> flat() { return std::span<T>(data_); }
  std::span<const T> flat() const { return std::span<const T>(data_); }

  void fill(T value) { data_.assign(data_.size(), value); }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

namespace detail {
template <typename T>
inline void check_gemm(std::size_t ak, std::size_t bk, std::size_t cr,
                       std::size_t cc, std::size_t m, std::size_t n) {
  if (ak != bk || cr != m || cc != n)
    throw InvalidParameter("matmul: incompatible shapes");
}
}  // namespace detail

// C (+)= A * B.  A: m×k, B: k×n.  ikj order so the inner loop streams rows.
template <typename T>
void matmul(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c,
            bool accumulate = false) {
  detail::check_gemm<T>(a.cols(), b.rows(), c.rows(), c.cols(), a.rows(),
                        b.cols());
  if (!accumulate) c.fill(T(0));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a.row(i);
    T* crow = c.row(i);
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      const T* brow = b.row(p);
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C (+)= A * Bᵀ.  A: m×k, B: n×k.
template <typename T>
void matmul_nt(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c,
               bool accumulate = false) {
  detail::check_gemm<T>(a.cols(), b.cols(), c.rows(), c.cols(), a.rows(),
                        b.rows());
  if (!accumulate) c.fill(T(0));
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a.row(i);
    T* crow = c.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      const T* brow = b.row(j);
      T acc = T(0);
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

// C (+)= Aᵀ * B.  A: k×m, B: k×n.
template <typename T>
void matmul_tn(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c,
               bool accumulate = false) {
  detail::check_gemm<T>(a.rows(), b.rows(), c.rows(), c.cols(), a.cols(),
                        b.cols());
  if (!accumulate) c.fill(T(0));
  const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  for (std::size_t p = 0; p < k; ++p) {
    const T* arow = a.row(p);
    const T* brow = b.row(p);
    for (std::size_t i = 0; i < m; ++i) {
      const T av = arow[i];
      if (av == T(0)) continue;
      T* crow = c.row(i);
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace pelab
