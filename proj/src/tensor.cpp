#include "pvsn/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace pvsn {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad)
    : impl_(std::make_shared<TensorImpl<T>>()) {
  for (auto e : shape) {
    if (e == 0) throw std::invalid_argument("tensor extents must be positive, got " + shape_str(shape));
  }
  if (numel(shape) != values.size()) {
    throw std::invalid_argument("tensor shape " + shape_str(shape) + " holds " +
                                std::to_string(numel(shape)) + " values, got " +
                                std::to_string(values.size()));
  }
  impl_->shape = std::move(shape);
  impl_->values = std::move(values);
  impl_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  std::vector<T> v(numel(shape), value);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) throw std::invalid_argument("item() on tensor of shape " + shape_str(shape()));
  return impl_->values[0];
}

template <typename T>
std::span<T> Tensor<T>::grad_buffer() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->values.size(), T(0));
  return impl_->grad;
}

template <typename T>
void Tensor<T>::zero_grad() const {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(impl_->shape, impl_->values, false);
}

template <typename T>
void Tensor<T>::backward() const {
  if (size() != 1) {
    throw std::invalid_argument("backward() requires a scalar loss, got shape " + shape_str(shape()));
  }
  if (!requires_grad()) throw std::invalid_argument("backward() on a tensor that is not graph-tracked");

  // Iterative post-order DFS yields a topological order (inputs before users).
  std::vector<Tensor<T>> order;
  std::unordered_set<const TensorImpl<T>*> visited;
  std::vector<std::pair<Tensor<T>, std::size_t>> stack;
  stack.emplace_back(*this, 0);
  visited.insert(id());
  while (!stack.empty()) {
    auto& [t, next] = stack.back();
    const auto& node = t.node();
    if (node && next < node->inputs.size()) {
      const Tensor<T>& in = node->inputs[next++];
      if (in.requires_grad() && visited.insert(in.id()).second) stack.emplace_back(in, 0);
      continue;
    }
    order.push_back(t);
    stack.pop_back();
  }

  for (auto& t : order) {
    if (!t.is_leaf()) t.impl_->grad.clear();
  }
  Tensor<T> root = *this;
  root.grad_buffer()[0] += T(1);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Tensor<T>& t = *it;
    if (t.is_leaf() || t.impl_->grad.empty()) continue;
    t.node()->backward(t.impl_->grad);
    // Intermediate gradients do not outlive the sweep.
    std::vector<T>().swap(t.impl_->grad);
  }
}

template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> values, std::vector<Tensor<T>> inputs,
                      const char* op, std::function<void(std::span<const T>)> backward) {
  Tensor<T> out(std::move(shape), std::move(values), false);
  if (!g_grad_enabled) return out;
  bool tracked = std::any_of(inputs.begin(), inputs.end(),
                             [](const Tensor<T>& t) { return t.defined() && t.requires_grad(); });
  if (!tracked) return out;
  auto node = std::make_shared<Node<T>>();
  node->op = op;
  node->inputs = std::move(inputs);
  node->backward = std::move(backward);
  out.impl_->node = std::move(node);
  out.impl_->requires_grad = true;
  return out;
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> make_result(Shape, std::vector<float>, std::vector<Tensor<float>>,
                                   const char*, std::function<void(std::span<const float>)>);
template Tensor<double> make_result(Shape, std::vector<double>, std::vector<Tensor<double>>,
                                    const char*, std::function<void(std::span<const double>)>);

}  // namespace pvsn
