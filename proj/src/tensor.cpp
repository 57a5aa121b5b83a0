#include "wavestyle/tensor.hpp"

#include <cmath>

#include "wavestyle/common.hpp"

namespace wavestyle {

std::size_t Tensor::count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != count(shape_))
    throw ParamError("tensor: data length does not match shape");
}

Tensor Tensor::scalar(double v) {
  Tensor t({1});
  t[0] = v;
  return t;
}

void Tensor::fill(double v) {
  for (double& x : data_) x = v;
}

bool Tensor::all_finite() const {
  for (double x : data_)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace wavestyle
