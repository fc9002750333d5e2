#include "pvsn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pvsn {

const char* loss_name(LossKind kind) {
  return kind == LossKind::Contrastive ? "contrastive" : "bce";
}

LossKind parse_loss(const std::string& name) {
  if (name == "contrastive") return LossKind::Contrastive;
  if (name == "bce" || name == "cross-entropy" || name == "cross_entropy") return LossKind::CrossEntropy;
  throw std::invalid_argument("unknown loss '" + name + "' (expected contrastive or bce)");
}

template <typename T>
Tensor<T> contrastive_loss(const Tensor<T>& distance, bool genuine, T margin) {
  const T d = distance.item();
  // Label y is 0 for genuine pairs and 1 for imposters.
  const T hinge = std::max(T(0), margin - d);
  const T value = genuine ? T(0.5) * d * d : T(0.5) * hinge * hinge;
  return make_result<T>(Shape{1}, {value}, {distance}, "contrastive_loss",
                        [distance, genuine, d, hinge](std::span<const T> grad) mutable {
                          distance.grad_buffer()[0] += grad[0] * (genuine ? d : -hinge);
                        });
}

template <typename T>
Tensor<T> bce_loss(const Tensor<T>& probability, bool genuine) {
  const T raw = probability.item();
  const T lo = static_cast<T>(kProbabilityClamp), hi = T(1) - lo;
  const T p = std::clamp(raw, lo, hi);
  const bool clamped = raw < lo || raw > hi;
  const T value = genuine ? -std::log(p) : -std::log(T(1) - p);
  return make_result<T>(Shape{1}, {value}, {probability}, "bce_loss",
                        [probability, genuine, p, clamped](std::span<const T> grad) mutable {
                          if (clamped) return;
                          probability.grad_buffer()[0] += grad[0] * (genuine ? -T(1) / p : T(1) / (T(1) - p));
                        });
}

template <typename T>
Tensor<T> bce_with_logits_loss(const Tensor<T>& logit, bool genuine) {
  const T z = genuine ? -logit.item() : logit.item();
  const T value = std::max(z, T(0)) + std::log1p(std::exp(-std::abs(z)));
  const T s = z >= T(0) ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
  return make_result<T>(Shape{1}, {value}, {logit}, "bce_with_logits_loss",
                        [logit, genuine, s](std::span<const T> grad) mutable {
                          logit.grad_buffer()[0] += grad[0] * (genuine ? -s : s);
                        });
}

template Tensor<float> contrastive_loss(const Tensor<float>&, bool, float);
template Tensor<double> contrastive_loss(const Tensor<double>&, bool, double);
template Tensor<float> bce_loss(const Tensor<float>&, bool);
template Tensor<double> bce_loss(const Tensor<double>&, bool);
template Tensor<float> bce_with_logits_loss(const Tensor<float>&, bool);
template Tensor<double> bce_with_logits_loss(const Tensor<double>&, bool);

}  // namespace pvsn
