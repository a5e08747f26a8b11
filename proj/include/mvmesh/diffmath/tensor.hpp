#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mvmesh {

using Index = std::ptrdiff_t;
using Shape = std::vector<Index>;

template <typename T>
using VectorX = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using RowMatrixX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Raised when operand shapes are incompatible. The message names both shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

inline ShapeError shape_error(const std::string& op, const Shape& a, const Shape& b) {
  return ShapeError(op + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

/// Row-major strides for `shape`.
inline Shape strides_of(const Shape& shape) {
  Shape strides(shape.size(), 1);
  for (Index i = static_cast<Index>(shape.size()) - 2; i >= 0; --i)
    strides[i] = strides[i + 1] * shape[i + 1];
  return strides;
}

/// Dense row-major array with a runtime shape. Storage is an Eigen column
/// vector so slices can be mapped as matrices without copying.
template <typename T>
class Tensor {
 public:
  using Scalar = T;

  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(VectorX<T>::Zero(shape_size(shape_))) {}
  Tensor(Shape shape, T fill) : shape_(std::move(shape)), data_(VectorX<T>::Constant(shape_size(shape_), fill)) {}
  Tensor(Shape shape, VectorX<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_))
      throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                       shape_str(shape_));
  }
  Tensor(Shape shape, std::initializer_list<T> values) : shape_(std::move(shape)), data_(values.size()) {
    Index i = 0;
    for (T v : values) data_[i++] = v;
    if (data_.size() != shape_size(shape_))
      throw ShapeError("tensor literal length does not match shape " + shape_str(shape_));
  }

  static Tensor scalar(T v) { return Tensor(Shape{}, VectorX<T>::Constant(1, v)); }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(axis < 0 ? axis + rank() : axis); }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  VectorX<T>& values() { return data_; }
  const VectorX<T>& values() const { return data_; }

  T& operator[](Index i) { return data_[i]; }
  T operator[](Index i) const { return data_[i]; }

  T item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
    return data_[0];
  }

  /// View the contiguous data as a rows x cols row-major matrix.
  Eigen::Map<RowMatrixX<T>> matrix(Index rows, Index cols) {
    check_view(rows, cols);
    return {data_.data(), rows, cols};
  }
  Eigen::Map<const RowMatrixX<T>> matrix(Index rows, Index cols) const {
    check_view(rows, cols);
    return {data_.data(), rows, cols};
  }
  /// Matrix view of a rank-2 tensor.
  Eigen::Map<const RowMatrixX<T>> matrix() const { return matrix(dim(0), dim(1)); }
  Eigen::Map<RowMatrixX<T>> matrix() { return matrix(dim(0), dim(1)); }

  Tensor reshaped(Shape shape) const {
    if (shape_size(shape) != size())
      throw shape_error("reshape", shape_, shape);
    return Tensor(std::move(shape), data_);
  }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, data_.template cast<U>());
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  void check_view(Index rows, Index cols) const {
    if (rows * cols != size())
      throw ShapeError("matrix view " + std::to_string(rows) + "x" + std::to_string(cols) + " of tensor " +
                       shape_str(shape_));
  }

  Shape shape_;
  VectorX<T> data_;
};

/// Numpy-style broadcast of two shapes: dims align right, each pair equal or 1.
inline Shape broadcast_shapes(const Shape& a, const Shape& b, const std::string& op) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    const Index da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const Index db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) throw shape_error(op, a, b);
    out[i] = da == 1 ? db : da;
  }
  return out;
}

/// Maps each flat index of a broadcast output back to the flat index of one
/// input. Built once per op and reused by forward and backward passes.
inline std::vector<Index> broadcast_index_map(const Shape& in, const Shape& out) {
  const std::size_t rank = out.size();
  Shape in_aligned(rank, 1);
  for (std::size_t i = 0; i < in.size(); ++i) in_aligned[rank - in.size() + i] = in[i];
  const Shape in_strides = strides_of(in_aligned);
  Shape eff(rank);
  for (std::size_t i = 0; i < rank; ++i) eff[i] = in_aligned[i] == 1 ? 0 : in_strides[i];

  const Index n = shape_size(out);
  std::vector<Index> map(static_cast<std::size_t>(n));
  Shape counter(rank, 0);
  Index offset = 0;
  for (Index flat = 0; flat < n; ++flat) {
    map[static_cast<std::size_t>(flat)] = offset;
    for (Index d = static_cast<Index>(rank) - 1; d >= 0; --d) {
      if (++counter[d] < out[d]) {
        offset += eff[d];
        break;
      }
      offset -= eff[d] * (out[d] - 1);
      counter[d] = 0;
    }
  }
  return map;
}

}  // namespace mvmesh
