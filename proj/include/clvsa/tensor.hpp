#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace clvsa::diff {

// Dense row-major tensor of 64-bit floats. The shape product must equal the
// value count and every value must be finite; both are enforced at
// construction.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);  // zero filled
  Tensor(std::vector<int> shape, std::vector<double> values);

  static Tensor scalar(double v);
  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::int64_t size() const {
    return static_cast<std::int64_t>(values_.size());
  }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  double& operator[](std::int64_t i) {
    return values_[static_cast<std::size_t>(i)];
  }
  double operator[](std::int64_t i) const {
    return values_[static_cast<std::size_t>(i)];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  void fill(double v);
  std::string shape_str() const;

 private:
  std::vector<int> shape_;
  std::vector<double> values_;
};

std::int64_t shape_product(const std::vector<int>& shape);

}  // namespace clvsa::diff
