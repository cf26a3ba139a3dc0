#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace xtb {

// Dense row-major tensor of doubles. Shapes are small (rank <= 4).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(checked_size(shape_), fill) {}
  Tensor(std::vector<int> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_size(shape_) != data_.size())
      throw std::invalid_argument("Tensor: shape/data size mismatch");
  }

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  int rank() const { return static_cast<int>(shape_.size()); }
  size_t size() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](size_t i) { return data_[i]; }
  double operator[](size_t i) const { return data_[i]; }

  // 2-D accessors
  double& at(int r, int c) { return data_[static_cast<size_t>(r) * dim(1) + c]; }
  double at(int r, int c) const { return data_[static_cast<size_t>(r) * dim(1) + c]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  static std::string shape_str(const std::vector<int>& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
      out += std::to_string(s[i]);
      if (i + 1 < s.size()) out += ",";
    }
    return out + "]";
  }
  std::string shape_str() const { return shape_str(shape_); }

 private:
  static size_t checked_size(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) {
      if (d <= 0) throw std::invalid_argument("Tensor: non-positive dim");
      n *= static_cast<size_t>(d);
    }
    return n;
  }

  std::vector<int> shape_;
  std::vector<double> data_;
};

}  // namespace xtb
