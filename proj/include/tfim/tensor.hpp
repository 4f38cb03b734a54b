#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cassert>
#include <complex>
#include <numeric>
#include <vector>

#include "tfim/error.hpp"

namespace tfim {

using cd = std::complex<double>;
using RowMatrix = Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

/// Dense row-major complex tensor; the last index runs fastest.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), cd(0.0)) {}
  Tensor(Shape shape, std::vector<cd> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_)) throw Error(ErrorCategory::domain, "tensor data does not match shape");
  }

  const Shape& shape() const { return shape_; }
  std::size_t dim(std::size_t k) const { return shape_[k]; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::vector<cd>& data() { return data_; }
  const std::vector<cd>& data() const { return data_; }

  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    assert(idx.size() == shape_.size());
    std::size_t off = 0;
    std::size_t k = 0;
    for (std::size_t i : idx) off = off * shape_[k++] + i;
    return off;
  }
  cd& operator()(std::initializer_list<std::size_t> idx) { return data_[offset(idx)]; }
  const cd& operator()(std::initializer_list<std::size_t> idx) const { return data_[offset(idx)]; }

  Tensor reshape(Shape s) const {
    if (shape_size(s) != data_.size()) throw Error(ErrorCategory::domain, "reshape changes tensor size");
    return Tensor(std::move(s), data_);
  }

  Tensor conj() const {
    Tensor t(shape_);
    std::transform(data_.begin(), data_.end(), t.data_.begin(), [](cd z) { return std::conj(z); });
    return t;
  }

  double norm() const {
    double s = 0.0;
    for (cd z : data_) s += std::norm(z);
    return std::sqrt(s);
  }

  Tensor& operator*=(cd s) {
    for (cd& z : data_) z *= s;
    return *this;
  }

  /// New tensor whose k-th leg is this tensor's perm[k]-th leg.
  Tensor permute(const std::vector<int>& perm) const {
    const std::size_t r = shape_.size();
    bool identity = true;
    for (std::size_t k = 0; k < r; ++k) identity = identity && perm[k] == static_cast<int>(k);
    if (identity) return *this;
    Shape out_shape(r);
    for (std::size_t k = 0; k < r; ++k) out_shape[k] = shape_[perm[k]];
    std::vector<std::size_t> in_stride(r, 1);
    for (std::size_t k = r; k-- > 1;) in_stride[k - 1] = in_stride[k] * shape_[k];
    std::vector<std::size_t> stride(r);
    for (std::size_t k = 0; k < r; ++k) stride[k] = in_stride[perm[k]];
    Tensor out(out_shape);
    if (data_.empty()) return out;
    std::vector<std::size_t> idx(r, 0);
    std::size_t src = 0;
    const std::size_t inner = r ? out_shape[r - 1] : 1;
    const std::size_t inner_stride = r ? stride[r - 1] : 0;
    for (std::size_t dst = 0; dst < out.data_.size(); dst += inner) {
      std::size_t s = src;
      for (std::size_t i = 0; i < inner; ++i, s += inner_stride) out.data_[dst + i] = data_[s];
      // advance the multi-index, skipping the innermost leg
      for (std::size_t k = r - 1; k-- > 0;) {
        ++idx[k];
        src += stride[k];
        if (idx[k] < out_shape[k]) break;
        src -= stride[k] * idx[k];
        idx[k] = 0;
      }
    }
    return out;
  }

  Eigen::Map<RowMatrix> matrix(std::size_t rows) {
    return {data_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(rows ? data_.size() / rows : 0)};
  }
  Eigen::Map<const RowMatrix> matrix(std::size_t rows) const {
    return {data_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(rows ? data_.size() / rows : 0)};
  }

  static Tensor from_matrix(const RowMatrix& m, Shape s) {
    Tensor t(std::move(s));
    if (t.size() != static_cast<std::size_t>(m.size())) throw Error(ErrorCategory::domain, "matrix size mismatch");
    std::copy(m.data(), m.data() + m.size(), t.data_.begin());
    return t;
  }

 private:
  Shape shape_;
  std::vector<cd> data_;
};

/// Contracts legs axes_a of a with legs axes_b of b. Result legs: free legs of
/// a in order, then free legs of b in order.
inline Tensor contract(const Tensor& a, const std::vector<int>& axes_a, const Tensor& b, const std::vector<int>& axes_b) {
  if (axes_a.size() != axes_b.size()) throw Error(ErrorCategory::domain, "contraction axis count mismatch");
  std::vector<bool> used_a(a.rank(), false), used_b(b.rank(), false);
  std::size_t k_dim = 1;
  for (std::size_t i = 0; i < axes_a.size(); ++i) {
    if (a.dim(axes_a[i]) != b.dim(axes_b[i])) throw Error(ErrorCategory::domain, "contracted legs differ in size");
    used_a[axes_a[i]] = true;
    used_b[axes_b[i]] = true;
    k_dim *= a.dim(axes_a[i]);
  }
  std::vector<int> perm_a, perm_b;
  Shape out_shape;
  std::size_t rows = 1, cols = 1;
  for (std::size_t i = 0; i < a.rank(); ++i)
    if (!used_a[i]) {
      perm_a.push_back(static_cast<int>(i));
      out_shape.push_back(a.dim(i));
      rows *= a.dim(i);
    }
  for (int ax : axes_a) perm_a.push_back(ax);
  for (int ax : axes_b) perm_b.push_back(ax);
  for (std::size_t i = 0; i < b.rank(); ++i)
    if (!used_b[i]) {
      perm_b.push_back(static_cast<int>(i));
      out_shape.push_back(b.dim(i));
      cols *= b.dim(i);
    }
  const Tensor ap = a.permute(perm_a);
  const Tensor bp = b.permute(perm_b);
  Tensor out(out_shape);
  if (rows == 0 || cols == 0) return out;
  Eigen::Map<const RowMatrix> am(ap.data().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(k_dim));
  Eigen::Map<const RowMatrix> bm(bp.data().data(), static_cast<Eigen::Index>(k_dim), static_cast<Eigen::Index>(cols));
  Eigen::Map<RowMatrix> om(out.data().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  om.noalias() = am * bm;
  return out;
}

struct SvdResult {
  RowMatrix U;
  Eigen::VectorXd S;
  RowMatrix Vh;
};

inline SvdResult svd(const RowMatrix& m) {
  Eigen::BDCSVD<Eigen::MatrixXcd> solver(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {solver.matrixU(), solver.singularValues(), solver.matrixV().adjoint()};
}

/// Thin QR: m = Q R with Q having min(rows, cols) orthonormal columns.
inline std::pair<RowMatrix, RowMatrix> thin_qr(const RowMatrix& m) {
  const Eigen::Index k = std::min(m.rows(), m.cols());
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(m);
  Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(m.rows(), k);
  Eigen::MatrixXcd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  return {q, r};
}

}  // namespace tfim
