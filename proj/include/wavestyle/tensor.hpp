#ifndef WAVESTYLE_TENSOR_HPP
#define WAVESTYLE_TENSOR_HPP

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace wavestyle {

// Dense row-major tensor of doubles. Shapes are small (rank <= 3 in
// practice); data lives in one flat allocation.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);
  static Tensor scalar(double v);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_[axis]; }
  std::size_t size() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
  }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  void fill(double v);
  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  // Total element count implied by a shape; empty shape -> 1 (scalar).
  static std::size_t count(const std::vector<std::size_t>& shape);

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

}  // namespace wavestyle

#endif  // WAVESTYLE_TENSOR_HPP
