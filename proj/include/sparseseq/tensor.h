// Copyright 2026 The sparseseq Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SPARSESEQ_TENSOR_H_
#define SPARSESEQ_TENSOR_H_

#include <cstddef>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace sparseseq {

using MatrixMap = Eigen::Map<
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatrixMap = Eigen::Map<const Eigen::Matrix<
    double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// Storage allocator with a fixed 64-byte alignment. Eigen's vectorized
// reductions peel leading elements according to the buffer address, so a
// fixed alignment keeps results independent of the malloc implementation.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlign));
  }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const {
    return true;
  }
};

// Dense row-major array of doubles. Rank 1 tensors behave as a single row
// wherever a matrix view is needed.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  // Builds a rows x cols matrix from nested initializer lists.
  static Tensor FromRows(
      std::initializer_list<std::initializer_list<double>> rows);
  static Tensor Zeros(std::size_t rows, std::size_t cols) {
    return Tensor({rows, cols});
  }
  static Tensor Identity(std::size_t n);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const {
    return data_[r * cols() + c];
  }

  MatrixMap matrix() {
    return MatrixMap(data_.data(), static_cast<Eigen::Index>(rows()),
                     static_cast<Eigen::Index>(cols()));
  }
  ConstMatrixMap matrix() const {
    return ConstMatrixMap(data_.data(), static_cast<Eigen::Index>(rows()),
                          static_cast<Eigen::Index>(cols()));
  }

  bool SameShape(const Tensor& other) const { return shape_ == other.shape_; }
  void Fill(double v);
  // Elementwise this += other; shapes must match.
  void Accumulate(const Tensor& other);
  double Sum() const;
  double SquaredNorm() const;
  bool AllFinite() const;
  std::size_t CountNonZero() const;

  std::string ShapeString() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double, AlignedAllocator<double>> data_;
};

std::string ShapeString(const std::vector<std::size_t>& shape);

}  // namespace sparseseq

#endif  // SPARSESEQ_TENSOR_H_
