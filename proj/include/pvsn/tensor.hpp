#ifndef PVSN_TENSOR_HPP
#define PVSN_TENSOR_HPP

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pvsn {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
class Tensor;

/// One recorded operation in the differentiation graph. `backward` receives
/// the gradient of the produced tensor and accumulates into `inputs`.
template <typename T>
struct Node {
  const char* op = "";
  std::vector<Tensor<T>> inputs;
  std::function<void(std::span<const T>)> backward;
};

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> values;
  std::vector<T> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  std::shared_ptr<Node<T>> node;  // null for leaves
};

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Dense row-major tensor with a handle to its storage. Copies share storage
/// (parameter identity); use `clone()` or `detach()` for an independent copy.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t size() const { return impl_->values.size(); }

  std::span<T> values() { return impl_->values; }
  std::span<const T> values() const { return impl_->values; }
  T item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool flag) { impl_->requires_grad = flag; }
  bool is_leaf() const { return impl_->node == nullptr; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }
  /// Gradient storage, allocated as zeros on first access.
  std::span<T> grad_buffer() const;
  void zero_grad() const;

  /// Same values, no graph history, independent storage.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  /// Reverse-mode sweep from this scalar. Leaf gradients accumulate.
  void backward() const;

  const TensorImpl<T>* id() const { return impl_.get(); }
  const std::shared_ptr<Node<T>>& node() const { return impl_->node; }

 private:
  template <typename U>
  friend Tensor<U> make_result(Shape, std::vector<U>, std::vector<Tensor<U>>,
                               const char*,
                               std::function<void(std::span<const U>)>);

  std::shared_ptr<TensorImpl<T>> impl_;
};

/// Builds the output of an operation. The node is only recorded when grad
/// mode is on and at least one input requires a gradient.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> values,
                      std::vector<Tensor<T>> inputs, const char* op,
                      std::function<void(std::span<const T>)> backward);

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template Tensor<float> make_result(Shape, std::vector<float>,
                                          std::vector<Tensor<float>>,
                                          const char*,
                                          std::function<void(std::span<const float>)>);
extern template Tensor<double> make_result(Shape, std::vector<double>,
                                           std::vector<Tensor<double>>,
                                           const char*,
                                           std::function<void(std::span<const double>)>);

}  // namespace pvsn

#endif  // PVSN_TENSOR_HPP
