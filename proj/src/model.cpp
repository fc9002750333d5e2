#include "pvsn/model.hpp"

#include <cmath>
#include <stdexcept>

namespace pvsn {

std::vector<std::size_t> Architecture::spatial_chain() const {
  std::vector<std::size_t> chain;
  std::size_t extent = input_size;
  for (std::size_t b = 0; b < kBlocks; ++b) {
    extent = window_extent(extent, kKernel, 1, kPadding[b]);
    chain.push_back(extent);
    extent = window_extent(extent, kPool, kPool);
    chain.push_back(extent);
  }
  return chain;
}

std::size_t Architecture::flatten_size() const {
  const std::size_t e = final_extent();
  return channels * e * e;
}

namespace {

std::string indexed(const char* prefix, std::size_t i, const char* suffix) {
  return std::string(prefix) + std::to_string(i + 1) + "." + suffix;
}

template <typename T>
Tensor<T> he_normal(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  std::vector<T> v(numel(shape));
  for (auto& x : v) x = static_cast<T>(dist(rng));
  return Tensor<T>(std::move(shape), std::move(v), true);
}

template <typename To, typename From>
Tensor<To> cast_tensor(const Tensor<From>& t) {
  std::vector<To> v(t.values().begin(), t.values().end());
  return Tensor<To>(t.shape(), std::move(v), t.requires_grad());
}

}  // namespace

template <typename T>
std::vector<typename SiameseParams<T>::Named> SiameseParams<T>::extractor_parameters() const {
  std::vector<Named> out;
  for (std::size_t i = 0; i < 4; ++i) {
    out.emplace_back(indexed("conv", i, "weight"), conv_weight[i]);
    out.emplace_back(indexed("conv", i, "bias"), conv_bias[i]);
    out.emplace_back(indexed("bn", i, "gamma"), bn_gamma[i]);
    out.emplace_back(indexed("bn", i, "beta"), bn_beta[i]);
  }
  out.emplace_back("fc5.weight", fc5_weight);
  out.emplace_back("fc5.bias", fc5_bias);
  out.emplace_back("fc6.weight", fc6_weight);
  out.emplace_back("fc6.bias", fc6_bias);
  return out;
}

template <typename T>
std::vector<typename SiameseParams<T>::Named> SiameseParams<T>::head_parameters() const {
  return {{"head.theta0", theta0}, {"head.theta1", theta1}};
}

template <typename T>
std::vector<typename SiameseParams<T>::Named> SiameseParams<T>::state() const {
  std::vector<Named> out;
  for (std::size_t i = 0; i < 4; ++i) {
    out.emplace_back(indexed("conv", i, "weight"), conv_weight[i]);
    out.emplace_back(indexed("conv", i, "bias"), conv_bias[i]);
    out.emplace_back(indexed("bn", i, "gamma"), bn_gamma[i]);
    out.emplace_back(indexed("bn", i, "beta"), bn_beta[i]);
    const Shape c{bn_state[i].running_mean.size()};
    out.emplace_back(indexed("bn", i, "running_mean"), Tensor<T>(c, bn_state[i].running_mean));
    out.emplace_back(indexed("bn", i, "running_var"), Tensor<T>(c, bn_state[i].running_var));
  }
  out.emplace_back("fc5.weight", fc5_weight);
  out.emplace_back("fc5.bias", fc5_bias);
  out.emplace_back("fc6.weight", fc6_weight);
  out.emplace_back("fc6.bias", fc6_bias);
  out.emplace_back("head.theta0", theta0);
  out.emplace_back("head.theta1", theta1);
  out.emplace_back("loss.margin", Tensor<T>::scalar(margin));
  return out;
}

template <typename T>
void SiameseParams<T>::zero_grad() {
  for (auto& [name, t] : extractor_parameters()) t.zero_grad();
  theta0.zero_grad();
  theta1.zero_grad();
}

template <typename T>
SiameseParams<T> SiameseParams<T>::clone() const {
  return cast_params<T>(*this);
}

template <typename To, typename From>
SiameseParams<To> cast_params(const SiameseParams<From>& p) {
  SiameseParams<To> out;
  out.arch = p.arch;
  for (std::size_t i = 0; i < 4; ++i) {
    out.conv_weight[i] = cast_tensor<To>(p.conv_weight[i]);
    out.conv_bias[i] = cast_tensor<To>(p.conv_bias[i]);
    out.bn_gamma[i] = cast_tensor<To>(p.bn_gamma[i]);
    out.bn_beta[i] = cast_tensor<To>(p.bn_beta[i]);
    out.bn_state[i].running_mean.assign(p.bn_state[i].running_mean.begin(), p.bn_state[i].running_mean.end());
    out.bn_state[i].running_var.assign(p.bn_state[i].running_var.begin(), p.bn_state[i].running_var.end());
  }
  out.fc5_weight = cast_tensor<To>(p.fc5_weight);
  out.fc5_bias = cast_tensor<To>(p.fc5_bias);
  out.fc6_weight = cast_tensor<To>(p.fc6_weight);
  out.fc6_bias = cast_tensor<To>(p.fc6_bias);
  out.theta0 = cast_tensor<To>(p.theta0);
  out.theta1 = cast_tensor<To>(p.theta1);
  out.margin = static_cast<To>(p.margin);
  return out;
}

template <typename T>
SiameseParams<T> init_params(std::uint64_t seed, const Architecture& arch, T margin) {
  if (!(margin > T(0))) throw std::invalid_argument("margin must be positive");
  const std::size_t flat = arch.flatten_size();  // validates the geometry
  std::mt19937_64 rng(seed);
  SiameseParams<T> p;
  p.arch = arch;
  const std::size_t k = Architecture::kKernel;
  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t in_ch = i == 0 ? 1 : arch.channels;
    p.conv_weight[i] = he_normal<T>({arch.channels, in_ch, k, k}, in_ch * k * k, rng);
    p.conv_bias[i] = Tensor<T>::zeros({arch.channels}, true);
    p.bn_gamma[i] = Tensor<T>::full({arch.channels}, T(1), true);
    p.bn_beta[i] = Tensor<T>::zeros({arch.channels}, true);
    p.bn_state[i] = BatchNormState<T>(arch.channels);
  }
  p.fc5_weight = he_normal<T>({arch.hidden, flat}, flat, rng);
  p.fc5_bias = Tensor<T>::zeros({arch.hidden}, true);
  p.fc6_weight = he_normal<T>({arch.embedding, arch.hidden}, arch.hidden, rng);
  p.fc6_bias = Tensor<T>::zeros({arch.embedding}, true);
  p.theta0 = Tensor<T>::scalar(T(0), true);
  p.theta1 = Tensor<T>::scalar(T(-1), true);
  p.margin = margin;
  return p;
}

namespace {

template <typename T>
Tensor<T> run_blocks(SiameseParams<T>& p, const Tensor<T>& images, const ForwardMode& mode,
                     std::vector<Shape>* trace) {
  const auto& a = p.arch;
  if (images.rank() != 4 || images.dim(1) != 1 || images.dim(2) != a.input_size ||
      images.dim(3) != a.input_size) {
    throw std::invalid_argument("extract_features: expected [N, 1, " + std::to_string(a.input_size) +
                                ", " + std::to_string(a.input_size) + "] images, got " +
                                shape_str(images.shape()));
  }
  Tensor<T> x = images;
  for (std::size_t i = 0; i < Architecture::kBlocks; ++i) {
    x = conv2d(x, p.conv_weight[i], p.conv_bias[i], 1, Architecture::kPadding[i]);
    if (trace) trace->push_back(x.shape());
    x = relu(x);
    x = batchnorm2d(x, p.bn_gamma[i], p.bn_beta[i], p.bn_state[i], mode.bn, mode.training);
    x = maxpool2d(x, Architecture::kPool, Architecture::kPool);
    if (trace) trace->push_back(x.shape());
  }
  return x;
}

}  // namespace

template <typename T>
Tensor<T> extract_features(SiameseParams<T>& p, const Tensor<T>& images, const ForwardMode& mode) {
  Tensor<T> x = flatten(run_blocks(p, images, mode, nullptr));
  x = relu(linear(x, p.fc5_weight, p.fc5_bias));
  if (mode.training && mode.dropout_rate > 0.0) {
    if (!mode.rng) throw std::invalid_argument("extract_features: dropout needs an rng");
    x = dropout(x, mode.dropout_rate, *mode.rng);
  }
  return sigmoid(linear(x, p.fc6_weight, p.fc6_bias));
}

template <typename T>
std::vector<Shape> trace_shapes(SiameseParams<T>& p, const Tensor<T>& images) {
  NoGradGuard no_grad;
  std::vector<Shape> trace;
  Tensor<T> x = flatten(run_blocks(p, images, ForwardMode{}, &trace));
  trace.push_back(x.shape());
  x = linear(x, p.fc5_weight, p.fc5_bias);
  trace.push_back(x.shape());
  x = linear(relu(x), p.fc6_weight, p.fc6_bias);
  trace.push_back(x.shape());
  return trace;
}

template <typename T>
Tensor<T> fuse(const Tensor<T>& left, const Tensor<T>& right) {
  return concat_cols(left, right);
}

template <typename T>
Tensor<T> pair_distance(const Tensor<T>& fx, const Tensor<T>& fy) {
  return l1_distance(fx, fy);
}

template <typename T>
Tensor<T> probability(const Tensor<T>& distance, const Tensor<T>& theta0, const Tensor<T>& theta1) {
  return sigmoid(add(theta0, mul(theta1, distance)));
}

double probability_value(double distance, double theta0, double theta1) {
  const double z = theta0 + theta1 * distance;
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

#define PVSN_INSTANTIATE_MODEL(T)                                                               \
  template struct SiameseParams<T>;                                                             \
  template SiameseParams<T> init_params(std::uint64_t, const Architecture&, T);                 \
  template Tensor<T> extract_features(SiameseParams<T>&, const Tensor<T>&, const ForwardMode&); \
  template std::vector<Shape> trace_shapes(SiameseParams<T>&, const Tensor<T>&);                \
  template Tensor<T> fuse(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> pair_distance(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> probability(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);

PVSN_INSTANTIATE_MODEL(float)
PVSN_INSTANTIATE_MODEL(double)

template SiameseParams<float> cast_params(const SiameseParams<float>&);
template SiameseParams<double> cast_params(const SiameseParams<float>&);
template SiameseParams<float> cast_params(const SiameseParams<double>&);
template SiameseParams<double> cast_params(const SiameseParams<double>&);

}  // namespace pvsn
