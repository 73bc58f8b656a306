#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dyfulm {

// Dense row-major float64 array with an optional gradient buffer.
// Tensor is a cheap shared handle; ops on a Tape produce new tensors and
// never mutate their inputs. The bgrad/epoch pair is transient scratch
// owned by the reverse pass, distinct from the persistent grad buffer.
struct TensorData {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;  // persistent; empty means absent
  bool requires_grad = false;

  // reverse-pass scratch (see Tape::bg)
  std::vector<double> bgrad;
  std::uint64_t epoch = 0;
};

inline std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

inline int shape_numel(const std::vector<int>& s) {
  int n = 1;
  for (int d : s) {
    if (d <= 0) throw std::invalid_argument("tensor axis must be positive, got " + shape_str(s));
    n *= d;
  }
  return n;
}

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    Tensor t;
    t.d_ = std::make_shared<TensorData>();
    t.d_->shape = std::move(shape);
    t.d_->data.assign(static_cast<size_t>(shape_numel(t.d_->shape)), 0.0);
    t.d_->requires_grad = requires_grad;
    return t;
  }

  static Tensor full(std::vector<int> shape, double value, bool requires_grad = false) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (double& v : t.d_->data) v = value;
    return t;
  }

  static Tensor from(std::vector<int> shape, std::vector<double> values, bool requires_grad = false) {
    if (static_cast<int>(values.size()) != shape_numel(shape))
      throw std::invalid_argument("data length " + std::to_string(values.size()) +
                                  " does not match shape " + shape_str(shape));
    Tensor t;
    t.d_ = std::make_shared<TensorData>();
    t.d_->shape = std::move(shape);
    t.d_->data = std::move(values);
    t.d_->requires_grad = requires_grad;
    return t;
  }

  static Tensor scalar(double value, bool requires_grad = false) {
    return from({1}, {value}, requires_grad);
  }

  bool defined() const { return d_ != nullptr; }

  const std::vector<int>& shape() const { return d_->shape; }
  int rank() const { return static_cast<int>(d_->shape.size()); }
  int dim(int axis) const { return d_->shape[static_cast<size_t>(axis)]; }
  int numel() const { return static_cast<int>(d_->data.size()); }

  double* data() { return d_->data.data(); }
  const double* data() const { return d_->data.data(); }
  std::vector<double>& vec() { return d_->data; }
  const std::vector<double>& vec() const { return d_->data; }

  bool requires_grad() const { return d_->requires_grad; }
  void set_requires_grad(bool v) { d_->requires_grad = v; }

  bool has_grad() const { return !d_->grad.empty(); }
  std::vector<double>& grad() {
    if (d_->grad.empty()) d_->grad.assign(d_->data.size(), 0.0);
    return d_->grad;
  }
  const std::vector<double>& grad() const {
    if (d_->grad.empty()) throw std::logic_error("tensor has no gradient");
    return d_->grad;
  }
  void zero_grad() { d_->grad.clear(); }

  // scalar convenience (numel-1 tensors)
  double value() const {
    if (numel() != 1) throw std::logic_error("value() on non-scalar tensor " + shape_str(shape()));
    return d_->data[0];
  }

  double at(std::initializer_list<int> idx) const {
    if (static_cast<int>(idx.size()) != rank())
      throw std::logic_error("index rank mismatch for " + shape_str(shape()));
    size_t flat = 0;
    int axis = 0;
    for (int i : idx) {
      if (i < 0 || i >= dim(axis)) throw std::out_of_range("tensor index out of range");
      flat = flat * static_cast<size_t>(dim(axis)) + static_cast<size_t>(i);
      ++axis;
    }
    return d_->data[flat];
  }

  TensorData* impl() const { return d_.get(); }
  const std::shared_ptr<TensorData>& handle() const { return d_; }

 private:
  std::shared_ptr<TensorData> d_;
};

}  // namespace dyfulm
