#ifndef PVSN_MODEL_HPP
#define PVSN_MODEL_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pvsn/ops.hpp"
#include "pvsn/tensor.hpp"

namespace pvsn {

/// Widths of the feature extractor. Kernel sizes, paddings (0, 0, 1, 1) and
/// the 2x2/2 pooling are fixed; only extents vary, so a shrunken copy of the
/// network can be gradient-checked.
struct Architecture {
  std::size_t input_size = 128;
  std::size_t channels = 64;
  std::size_t hidden = 1000;
  std::size_t embedding = 128;

  static Architecture full() { return {}; }
  static Architecture reduced() { return {24, 4, 16, 8}; }

  static constexpr std::size_t kBlocks = 4;
  static constexpr std::size_t kKernel = 3;
  static constexpr std::array<std::size_t, kBlocks> kPadding{0, 0, 1, 1};
  static constexpr std::size_t kPool = 2;

  /// Spatial extent after each conv and each pool, in order
  /// (conv1, pool1, conv2, pool2, ...). Throws if a window does not fit.
  std::vector<std::size_t> spatial_chain() const;
  std::size_t final_extent() const { return spatial_chain().back(); }
  std::size_t flatten_size() const;

  bool operator==(const Architecture&) const = default;
};

/// Learnable state of the shared extractor plus the probability head.
/// Every image path reads the same tensors; there is one extractor.
template <typename T>
struct SiameseParams {
  Architecture arch;
  std::array<Tensor<T>, 4> conv_weight;
  std::array<Tensor<T>, 4> conv_bias;
  std::array<Tensor<T>, 4> bn_gamma;
  std::array<Tensor<T>, 4> bn_beta;
  std::array<BatchNormState<T>, 4> bn_state;
  Tensor<T> fc5_weight, fc5_bias;
  Tensor<T> fc6_weight, fc6_bias;
  Tensor<T> theta0, theta1;
  T margin = T(1);

  using Named = std::pair<std::string, Tensor<T>>;

  /// Trainable extractor tensors in checkpoint order.
  std::vector<Named> extractor_parameters() const;
  /// theta0, theta1.
  std::vector<Named> head_parameters() const;
  /// Everything stored in a checkpoint, running statistics and margin included.
  /// Running statistics and margin are returned as detached copies.
  std::vector<Named> state() const;

  void zero_grad();
  SiameseParams clone() const;
};

/// He-normal conv/fc weights (std sqrt(2/fan_in)), zero biases, unit gamma,
/// zero beta, fresh running statistics, head (0, -1).
template <typename T>
SiameseParams<T> init_params(std::uint64_t seed, const Architecture& arch = Architecture::full(),
                             T margin = T(1));

struct ForwardMode {
  bool training = false;
  double dropout_rate = 0.3;
  std::mt19937_64* rng = nullptr;  // required when training with dropout > 0
  BatchNormOptions bn{};
};

/// Full stack: per block conv -> ReLU -> batchnorm -> maxpool(2, 2); then
/// flatten -> fc5 -> ReLU -> dropout (training only) -> fc6 -> sigmoid.
/// `images` is [N, 1, S, S] with S = arch.input_size; returns [N, embedding].
template <typename T>
Tensor<T> extract_features(SiameseParams<T>& params, const Tensor<T>& images, const ForwardMode& mode);

/// Spatial extents seen during a forward pass; used to pin the layer chain.
template <typename T>
std::vector<Shape> trace_shapes(SiameseParams<T>& params, const Tensor<T>& images);

/// Left embedding first, then right: [N, E] x [N, E] -> [N, 2E].
template <typename T>
Tensor<T> fuse(const Tensor<T>& left, const Tensor<T>& right);

/// L1 distance between two fused embeddings.
template <typename T>
Tensor<T> pair_distance(const Tensor<T>& fx, const Tensor<T>& fy);

/// sigmoid(theta0 + theta1 * d).
template <typename T>
Tensor<T> probability(const Tensor<T>& distance, const Tensor<T>& theta0, const Tensor<T>& theta1);

double probability_value(double distance, double theta0, double theta1);

/// Converts between precisions (same architecture, same values).
template <typename To, typename From>
SiameseParams<To> cast_params(const SiameseParams<From>& params);

}  // namespace pvsn

#endif  // PVSN_MODEL_HPP
