#include "clvsa/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace clvsa::diff {

std::int64_t shape_product(const std::vector<int>& shape) {
  std::int64_t p = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("tensor: negative dimension");
    p *= d;
  }
  return p;
}

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)),
      values_(static_cast<std::size_t>(shape_product(shape_)), 0.0) {}

Tensor::Tensor(std::vector<int> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_product(shape_) != static_cast<std::int64_t>(values_.size()))
    throw std::invalid_argument("tensor: shape " + shape_str() +
                                " does not match value count " +
                                std::to_string(values_.size()));
  for (double v : values_)
    if (!std::isfinite(v))
      throw std::invalid_argument("tensor: non-finite value rejected");
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

void Tensor::fill(double v) {
  for (double& x : values_) x = v;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << 'x';
    os << shape_[i];
  }
  os << ']';
  return os.str();
}

}  // namespace clvsa::diff
