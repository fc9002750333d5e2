#ifndef PVSN_LOSSES_HPP
#define PVSN_LOSSES_HPP

#include <string>

#include "pvsn/tensor.hpp"

namespace pvsn {

enum class LossKind { Contrastive, CrossEntropy };

const char* loss_name(LossKind kind);
/// Accepts "contrastive", "bce" and "cross-entropy".
LossKind parse_loss(const std::string& name);

/// Genuine pairs pay d^2/2, imposters pay max(0, margin - d)^2/2.
template <typename T>
Tensor<T> contrastive_loss(const Tensor<T>& distance, bool genuine, T margin);

inline constexpr double kProbabilityClamp = 1e-7;

/// -log p for genuine pairs, -log(1 - p) for imposters, with p clamped to
/// [1e-7, 1 - 1e-7]. The gradient is zero where the clamp is active.
template <typename T>
Tensor<T> bce_loss(const Tensor<T>& probability, bool genuine);

/// The same loss written on the logit z (p = sigmoid(z)): softplus(-z) for
/// genuine pairs, softplus(z) for imposters. Never saturates, so training
/// still gets a gradient when p is far outside the clamp range.
template <typename T>
Tensor<T> bce_with_logits_loss(const Tensor<T>& logit, bool genuine);

}  // namespace pvsn

#endif  // PVSN_LOSSES_HPP
