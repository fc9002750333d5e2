#ifndef PVSN_OPS_HPP
#define PVSN_OPS_HPP

#include <cstddef>
#include <random>
#include <vector>

#include "pvsn/tensor.hpp"

namespace pvsn {

/// Output extent of a sliding window: floor((in - kernel + 2*padding)/stride) + 1.
std::size_t window_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                          std::size_t padding = 0);

// Convolution and pooling over NCHW tensors.

/// Zero-padded cross-correlation; weight is [F, C, K, K], bias is [F].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride, std::size_t padding);

/// Max over kernel x kernel windows; ties route gradient to the first maximum.
template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& input, std::size_t kernel, std::size_t stride);

/// Per-channel running statistics owned by a batchnorm layer.
template <typename T>
struct BatchNormState {
  std::vector<T> running_mean;
  std::vector<T> running_var;

  explicit BatchNormState(std::size_t channels = 0)
      : running_mean(channels, T(0)), running_var(channels, T(1)) {}
};

struct BatchNormOptions {
  double eps = 1e-5;
  double momentum = 0.1;
};

/// Training mode normalizes with batch statistics (biased variance) and folds
/// them into `state` with the unbiased variance; inference mode reads `state`.
template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                      BatchNormState<T>& state, const BatchNormOptions& options, bool training);

/// input [N, D] times weight [M, D] transposed, plus bias [M].
template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T>
Tensor<T> relu(const Tensor<T>& input);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& input);

/// Inverted dropout: surviving units are scaled by 1/(1 - rate).
template <typename T>
Tensor<T> dropout(const Tensor<T>& input, double rate, std::mt19937_64& rng);

/// Sum of absolute differences; equal shapes required. Returns shape [1].
template <typename T>
Tensor<T> l1_distance(const Tensor<T>& a, const Tensor<T>& b);

// Elementwise and structural helpers.

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T alpha);
template <typename T>
Tensor<T> sum(const Tensor<T>& a);
template <typename T>
Tensor<T> mean(const Tensor<T>& a);
template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape);
/// [N, ...] -> [N, prod(rest)].
template <typename T>
Tensor<T> flatten(const Tensor<T>& a);
/// Row-wise concatenation of [N, A] and [N, B] into [N, A + B].
template <typename T>
Tensor<T> concat_cols(const Tensor<T>& a, const Tensor<T>& b);
/// Rows of a rank-2 tensor picked by index, in order.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& a, const std::vector<std::size_t>& rows);
/// Concatenates shape-[1] tensors into shape [K].
template <typename T>
Tensor<T> stack_scalars(const std::vector<Tensor<T>>& parts);

}  // namespace pvsn

#endif  // PVSN_OPS_HPP
