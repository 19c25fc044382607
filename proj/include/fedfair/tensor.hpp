#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fedfair/error.hpp"

namespace fedfair {

/// Named dense row-major matrix; vectors are n x 1.
struct Tensor {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Tensor() = default;
  Tensor(std::string n, std::size_t r, std::size_t c) : name(std::move(n)), rows(r), cols(c), values(r * c, 0.0) {}

  std::size_t size() const { return values.size(); }
  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  bool same_shape(const Tensor& o) const { return name == o.name && rows == o.rows && cols == o.cols; }
};

/// y = W x (W is rows x cols, x has cols entries).
inline void matvec(const Tensor& w, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double* row = w.values.data() + r * w.cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < w.cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

/// y += W x
inline void matvec_add(const Tensor& w, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double* row = w.values.data() + r * w.cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < w.cols; ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
}

/// y += W^T g (g has rows entries, y has cols entries).
inline void matvec_transposed_add(const Tensor& w, std::span<const double> g, std::span<double> y) {
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double gr = g[r];
    if (gr == 0.0) continue;
    const double* row = w.values.data() + r * w.cols;
    for (std::size_t c = 0; c < w.cols; ++c) y[c] += row[c] * gr;
  }
}

/// dW += g x^T
inline void outer_add(Tensor& dw, std::span<const double> g, std::span<const double> x) {
  for (std::size_t r = 0; r < dw.rows; ++r) {
    const double gr = g[r];
    if (gr == 0.0) continue;
    double* row = dw.values.data() + r * dw.cols;
    for (std::size_t c = 0; c < dw.cols; ++c) row[c] += gr * x[c];
  }
}

/// Ordered list of tensors forming a model's parameter shape-tree.
class ParameterSet {
 public:
  ParameterSet() = default;
  explicit ParameterSet(std::vector<Tensor> tensors) : tensors_(std::move(tensors)) {}

  std::size_t add(std::string name, std::size_t rows, std::size_t cols) {
    tensors_.emplace_back(std::move(name), rows, cols);
    return tensors_.size() - 1;
  }

  std::size_t tensor_count() const { return tensors_.size(); }
  Tensor& operator[](std::size_t i) { return tensors_[i]; }
  const Tensor& operator[](std::size_t i) const { return tensors_[i]; }
  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
  }

  bool same_shape(const ParameterSet& o) const {
    if (o.tensors_.size() != tensors_.size()) return false;
    for (std::size_t i = 0; i < tensors_.size(); ++i)
      if (!tensors_[i].same_shape(o.tensors_[i])) return false;
    return true;
  }

  /// Zero-valued copy with identical shapes.
  ParameterSet zeros_like() const {
    ParameterSet z = *this;
    for (auto& t : z.tensors_) std::fill(t.values.begin(), t.values.end(), 0.0);
    return z;
  }

  double l2_norm() const {
    double s = 0.0;
    for (const auto& t : tensors_)
      for (double v : t.values) s += v * v;
    return std::sqrt(s);
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& t : tensors_) out.insert(out.end(), t.values.begin(), t.values.end());
    return out;
  }

  void assign_flat(std::span<const double> flat) {
    require(flat.size() == parameter_count(), ErrorCode::WidthMismatch, "flat parameter length");
    std::size_t k = 0;
    for (auto& t : tensors_)
      for (double& v : t.values) v = flat[k++];
  }

  /// this += a * other
  void axpy(double a, const ParameterSet& other) {
    require(same_shape(other), ErrorCode::WidthMismatch, "parameter shape-trees differ");
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
      auto& dst = tensors_[i].values;
      const auto& src = other.tensors_[i].values;
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += a * src[j];
    }
  }

  void scale(double a) {
    for (auto& t : tensors_)
      for (double& v : t.values) v *= a;
  }

  template <typename F>
  void for_each_value(F&& f) {
    for (auto& t : tensors_)
      for (double& v : t.values) f(v);
  }

  bool operator==(const ParameterSet& o) const {
    if (!same_shape(o)) return false;
    for (std::size_t i = 0; i < tensors_.size(); ++i)
      if (tensors_[i].values != o.tensors_[i].values) return false;
    return true;
  }

 private:
  std::vector<Tensor> tensors_;
};

/// Gradient or update with the same shape-tree as the model that produced it.
struct ModelGradient {
  ParameterSet values;

  double l2_norm() const { return values.l2_norm(); }
  bool operator==(const ModelGradient& o) const { return values == o.values; }
};

/// Element-wise difference a - b of two same-shaped parameter sets.
inline ModelGradient difference(const ParameterSet& a, const ParameterSet& b) {
  require(a.same_shape(b), ErrorCode::WidthMismatch, "parameter shape-trees differ");
  ModelGradient d{a};
  for (std::size_t i = 0; i < a.tensor_count(); ++i) {
    auto& dst = d.values[i].values;
    const auto& src = b[i].values;
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] -= src[j];
  }
  return d;
}

}  // namespace fedfair
