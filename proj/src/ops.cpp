#include "pvsn/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace pvsn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

[[noreturn]] void shape_error(const std::string& op, const std::string& what, const Shape& a,
                              const Shape& b) {
  throw std::invalid_argument(op + ": " + what + " (" + shape_str(a) + " vs " + shape_str(b) + ")");
}

template <typename T>
void require_rank(const char* op, const Tensor<T>& t, std::size_t rank, const char* role) {
  if (t.rank() != rank) {
    throw std::invalid_argument(std::string(op) + ": " + role + " must have rank " +
                                std::to_string(rank) + ", got " + shape_str(t.shape()));
  }
}

struct ConvGeometry {
  std::size_t channels, height, width, kernel, stride, padding, out_h, out_w;
};

// Output columns [lo, hi) read inside the image for kernel offset k.
inline void valid_range(const ConvGeometry& g, std::size_t k, std::size_t extent, std::size_t out,
                        std::size_t& lo, std::size_t& hi) {
  lo = 0;
  while (lo < out && lo * g.stride + k < g.padding) ++lo;
  hi = lo;
  while (hi < out && hi * g.stride + k < g.padding + extent) ++hi;
}

template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* cols) {
  const std::size_t plane = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t kh = 0; kh < g.kernel; ++kh) {
      std::size_t h_lo, h_hi;
      valid_range(g, kh, g.height, g.out_h, h_lo, h_hi);
      for (std::size_t kw = 0; kw < g.kernel; ++kw) {
        std::size_t w_lo, w_hi;
        valid_range(g, kw, g.width, g.out_w, w_lo, w_hi);
        T* row = cols + ((c * g.kernel + kh) * g.kernel + kw) * plane;
        std::fill(row, row + h_lo * g.out_w, T(0));
        std::fill(row + h_hi * g.out_w, row + plane, T(0));
        for (std::size_t oh = h_lo; oh < h_hi; ++oh) {
          T* dst = row + oh * g.out_w;
          const T* src = image + (c * g.height + oh * g.stride + kh - g.padding) * g.width + kw - g.padding;
          std::fill(dst, dst + w_lo, T(0));
          std::fill(dst + w_hi, dst + g.out_w, T(0));
          if (g.stride == 1) {
            std::copy(src + w_lo, src + w_hi, dst + w_lo);
          } else {
            for (std::size_t ow = w_lo; ow < w_hi; ++ow) dst[ow] = src[ow * g.stride];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* image) {
  const std::size_t plane = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t kh = 0; kh < g.kernel; ++kh) {
      std::size_t h_lo, h_hi;
      valid_range(g, kh, g.height, g.out_h, h_lo, h_hi);
      for (std::size_t kw = 0; kw < g.kernel; ++kw) {
        std::size_t w_lo, w_hi;
        valid_range(g, kw, g.width, g.out_w, w_lo, w_hi);
        const T* row = cols + ((c * g.kernel + kh) * g.kernel + kw) * plane;
        for (std::size_t oh = h_lo; oh < h_hi; ++oh) {
          const T* src = row + oh * g.out_w;
          T* dst = image + (c * g.height + oh * g.stride + kh - g.padding) * g.width + kw - g.padding;
          for (std::size_t ow = w_lo; ow < w_hi; ++ow) dst[ow * g.stride] += src[ow];
        }
      }
    }
  }
}

template <typename T>
using ConstVec = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;

// Sums f(0..n-1) in eight fixed lanes. Eigen's packet reductions peel an
// unaligned head, so their rounding would depend on the buffer address.
template <typename F>
double lane_sum(std::size_t n, F f) {
  double acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t l = 0; l < 8; ++l) acc[l] += f(i + l);
  }
  for (; i < n; ++i) acc[i % 8] += f(i);
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
}

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) shape_error(op, "shapes must match", a.shape(), b.shape());
}

}  // namespace

std::size_t window_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                          std::size_t padding) {
  if (stride == 0) throw std::invalid_argument("stride must be positive");
  if (kernel == 0) throw std::invalid_argument("kernel must be positive");
  if (kernel > in + 2 * padding) {
    throw std::invalid_argument("kernel " + std::to_string(kernel) +
                                " exceeds padded extent " + std::to_string(in + 2 * padding));
  }
  return (in + 2 * padding - kernel) / stride + 1;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride, std::size_t padding) {
  require_rank("conv2d", input, 4, "input");
  require_rank("conv2d", weight, 4, "weight");
  if (stride == 0) throw std::invalid_argument("conv2d: stride must be positive");
  const std::size_t batch = input.dim(0);
  const std::size_t filters = weight.dim(0);
  if (weight.dim(1) != input.dim(1)) {
    shape_error("conv2d", "weight channels differ from input channels", input.shape(), weight.shape());
  }
  if (weight.dim(2) != weight.dim(3)) {
    throw std::invalid_argument("conv2d: filters must be square, got " + shape_str(weight.shape()));
  }
  if (bias.shape() != Shape{filters}) {
    shape_error("conv2d", "bias must be [filters]", weight.shape(), bias.shape());
  }
  const std::size_t k = weight.dim(2);
  if (k > input.dim(2) + 2 * padding || k > input.dim(3) + 2 * padding) {
    shape_error("conv2d", "filter larger than padded input", input.shape(), weight.shape());
  }
  ConvGeometry g{input.dim(1), input.dim(2), input.dim(3), k, stride, padding, 0, 0};
  g.out_h = window_extent(g.height, k, stride, padding);
  g.out_w = window_extent(g.width, k, stride, padding);

  const std::size_t patch = g.channels * k * k;
  const std::size_t plane = g.out_h * g.out_w;
  const std::size_t in_image = g.channels * g.height * g.width;
  std::vector<T> out(batch * filters * plane);
  std::vector<T> cols(patch * plane);
  ConstMatMap<T> w(weight.values().data(), filters, patch);
  const auto b = bias.values();
  for (std::size_t n = 0; n < batch; ++n) {
    im2col(input.values().data() + n * in_image, g, cols.data());
    MatMap<T> o(out.data() + n * filters * plane, filters, plane);
    o.noalias() = w * ConstMatMap<T>(cols.data(), patch, plane);
    for (std::size_t f = 0; f < filters; ++f) o.row(f).array() += b[f];
  }

  return make_result<T>(
      Shape{batch, filters, g.out_h, g.out_w}, std::move(out), {input, weight, bias}, "conv2d",
      [input, weight, bias, g, batch, filters, patch, plane, in_image](std::span<const T> grad) mutable {
        ConstMatMap<T> w(weight.values().data(), filters, patch);
        std::vector<T> cols(patch * plane);
        if (bias.requires_grad()) {
          auto db = bias.grad_buffer();
          for (std::size_t n = 0; n < batch; ++n) {
            for (std::size_t f = 0; f < filters; ++f) {
              const T* gp = grad.data() + (n * filters + f) * plane;
              T acc = 0;
              for (std::size_t i = 0; i < plane; ++i) acc += gp[i];
              db[f] += acc;
            }
          }
        }
        if (weight.requires_grad()) {
          MatMap<T> dw(weight.grad_buffer().data(), filters, patch);
          for (std::size_t n = 0; n < batch; ++n) {
            im2col(input.values().data() + n * in_image, g, cols.data());
            ConstMatMap<T> go(grad.data() + n * filters * plane, filters, plane);
            dw.noalias() += go * ConstMatMap<T>(cols.data(), patch, plane).transpose();
          }
        }
        if (input.requires_grad()) {
          auto dx = input.grad_buffer();
          MatMap<T> dcols(cols.data(), patch, plane);
          for (std::size_t n = 0; n < batch; ++n) {
            ConstMatMap<T> go(grad.data() + n * filters * plane, filters, plane);
            dcols.noalias() = w.transpose() * go;
            col2im_add(cols.data(), g, dx.data() + n * in_image);
          }
        }
      });
}

template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& input, std::size_t kernel, std::size_t stride) {
  require_rank("maxpool2d", input, 4, "input");
  if (kernel == 0 || stride == 0) throw std::invalid_argument("maxpool2d: kernel and stride must be positive");
  const std::size_t n_planes = input.dim(0) * input.dim(1);
  const std::size_t h = input.dim(2), w = input.dim(3);
  if (kernel > h || kernel > w) {
    throw std::invalid_argument("maxpool2d: kernel " + std::to_string(kernel) +
                                " larger than spatial extent of " + shape_str(input.shape()));
  }
  const std::size_t oh = window_extent(h, kernel, stride), ow = window_extent(w, kernel, stride);
  std::vector<T> out(n_planes * oh * ow);
  std::vector<std::size_t> argmax(out.size());
  const auto x = input.values();
  for (std::size_t p = 0; p < n_planes; ++p) {
    const std::size_t base = p * h * w;
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        std::size_t best = base + i * stride * w + j * stride;
        for (std::size_t a = 0; a < kernel; ++a) {
          for (std::size_t b = 0; b < kernel; ++b) {
            const std::size_t idx = base + (i * stride + a) * w + j * stride + b;
            if (x[idx] > x[best]) best = idx;
          }
        }
        const std::size_t o = (p * oh + i) * ow + j;
        out[o] = x[best];
        argmax[o] = best;
      }
    }
  }
  return make_result<T>(Shape{input.dim(0), input.dim(1), oh, ow}, std::move(out), {input},
                        "maxpool2d",
                        [input, argmax = std::move(argmax)](std::span<const T> grad) mutable {
                          auto dx = input.grad_buffer();
                          for (std::size_t o = 0; o < grad.size(); ++o) dx[argmax[o]] += grad[o];
                        });
}

template <typename T>
Tensor<T> batchnorm2d(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                      BatchNormState<T>& state, const BatchNormOptions& options, bool training) {
  require_rank("batchnorm2d", input, 4, "input");
  if (!(options.eps > 0)) throw std::invalid_argument("batchnorm2d: eps must be positive");
  const std::size_t batch = input.dim(0), channels = input.dim(1);
  const std::size_t plane = input.dim(2) * input.dim(3);
  const std::size_t count = batch * plane;
  if (gamma.shape() != Shape{channels} || beta.shape() != Shape{channels}) {
    shape_error("batchnorm2d", "gamma/beta must be [channels]", input.shape(), gamma.shape());
  }
  if (state.running_mean.size() != channels || state.running_var.size() != channels) {
    throw std::invalid_argument("batchnorm2d: running statistics hold " +
                                std::to_string(state.running_mean.size()) + " channels, input has " +
                                std::to_string(channels));
  }

  using Arr = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
  const auto x = input.values();
  const auto gm = gamma.values();
  const auto bt = beta.values();
  // Per channel: mean and 1/sqrt(var + eps). The normalized input is not
  // stored; backward recomputes it from x.
  std::vector<double> mean_c(channels), inv_std(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    double mu, var;
    if (training) {
      double s = 0, ss = 0;
      for (std::size_t n = 0; n < batch; ++n) {
        const T* p = x.data() + (n * channels + c) * plane;
        s += lane_sum(plane, [p](std::size_t i) { return static_cast<double>(p[i]); });
        ss += lane_sum(plane, [p](std::size_t i) { return static_cast<double>(p[i]) * p[i]; });
      }
      mu = s / static_cast<double>(count);
      const double dev = std::max(0.0, ss - s * mu);
      var = dev / static_cast<double>(count);
      const double unbiased = count > 1 ? dev / static_cast<double>(count - 1) : var;
      state.running_mean[c] = static_cast<T>((1.0 - options.momentum) * state.running_mean[c] +
                                             options.momentum * mu);
      state.running_var[c] = static_cast<T>((1.0 - options.momentum) * state.running_var[c] +
                                            options.momentum * unbiased);
    } else {
      mu = state.running_mean[c];
      var = state.running_var[c];
    }
    mean_c[c] = mu;
    inv_std[c] = 1.0 / std::sqrt(var + options.eps);
  }
  std::vector<T> out(x.size());
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t off = (n * channels + c) * plane;
      const T a = static_cast<T>(gm[c] * inv_std[c]);
      const T b0 = static_cast<T>(bt[c] - gm[c] * inv_std[c] * mean_c[c]);
      Arr(out.data() + off, plane) = ConstVec<T>(x.data() + off, plane) * a + b0;
    }
  }

  return make_result<T>(
      input.shape(), std::move(out), {input, gamma, beta}, "batchnorm2d",
      [input, gamma, beta, mean_c = std::move(mean_c), inv_std = std::move(inv_std), batch, channels,
       plane, count, training](std::span<const T> grad) mutable {
        const auto gm = gamma.values();
        const auto x = input.values();
        std::span<T> dx = input.requires_grad() ? input.grad_buffer() : std::span<T>{};
        for (std::size_t c = 0; c < channels; ++c) {
          double sum_dy = 0, sum_dy_x = 0;
          for (std::size_t n = 0; n < batch; ++n) {
            const std::size_t off = (n * channels + c) * plane;
            const T* dy = grad.data() + off;
            const T* xp = x.data() + off;
            sum_dy += lane_sum(plane, [dy](std::size_t i) { return static_cast<double>(dy[i]); });
            sum_dy_x += lane_sum(plane, [dy, xp](std::size_t i) { return static_cast<double>(dy[i]) * xp[i]; });
          }
          const double sum_dy_xhat = inv_std[c] * (sum_dy_x - mean_c[c] * sum_dy);
          if (gamma.requires_grad()) gamma.grad_buffer()[c] += static_cast<T>(sum_dy_xhat);
          if (beta.requires_grad()) beta.grad_buffer()[c] += static_cast<T>(sum_dy);
          if (dx.empty()) continue;
          // dx = k * (dy - mean(dy) - xhat * mean(dy * xhat)), xhat = (x - mu) * inv_std,
          // folded into dx += k * dy + u * x + v.
          const double k = gm[c] * inv_std[c];
          const double mean_dy = training ? sum_dy / static_cast<double>(count) : 0.0;
          const double mean_dy_xhat = training ? sum_dy_xhat / static_cast<double>(count) : 0.0;
          const double u = -k * mean_dy_xhat * inv_std[c];
          const double v = -k * mean_dy - u * mean_c[c];
          const T kt = static_cast<T>(k), ut = static_cast<T>(u), vt = static_cast<T>(v);
          for (std::size_t n = 0; n < batch; ++n) {
            const std::size_t off = (n * channels + c) * plane;
            Arr(dx.data() + off, plane) +=
                ConstVec<T>(grad.data() + off, plane) * kt + ConstVec<T>(x.data() + off, plane) * ut + vt;
          }
        }
      });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank("linear", input, 2, "input");
  require_rank("linear", weight, 2, "weight");
  const std::size_t rows = input.dim(0), in_dim = input.dim(1), out_dim = weight.dim(0);
  if (weight.dim(1) != in_dim) shape_error("linear", "inner dimensions differ", input.shape(), weight.shape());
  if (bias.shape() != Shape{out_dim}) shape_error("linear", "bias must be [out]", weight.shape(), bias.shape());

  std::vector<T> out(rows * out_dim);
  MatMap<T> o(out.data(), rows, out_dim);
  ConstMatMap<T> xm(input.values().data(), rows, in_dim);
  ConstMatMap<T> wm(weight.values().data(), out_dim, in_dim);
  o.noalias() = xm * wm.transpose();
  const auto b = bias.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < out_dim; ++j) o(r, j) += b[j];
  }
  return make_result<T>(
      Shape{rows, out_dim}, std::move(out), {input, weight, bias}, "linear",
      [input, weight, bias, rows, in_dim, out_dim](std::span<const T> grad) mutable {
        ConstMatMap<T> go(grad.data(), rows, out_dim);
        if (input.requires_grad()) {
          MatMap<T> dx(input.grad_buffer().data(), rows, in_dim);
          dx.noalias() += go * ConstMatMap<T>(weight.values().data(), out_dim, in_dim);
        }
        if (weight.requires_grad()) {
          MatMap<T> dw(weight.grad_buffer().data(), out_dim, in_dim);
          dw.noalias() += go.transpose() * ConstMatMap<T>(input.values().data(), rows, in_dim);
        }
        if (bias.requires_grad()) {
          auto db = bias.grad_buffer();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < out_dim; ++j) db[j] += go(r, j);
          }
        }
      });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  const auto x = input.values();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
  return make_result<T>(input.shape(), std::move(out), {input}, "relu",
                        [input](std::span<const T> grad) mutable {
                          const auto x = input.values();
                          auto dx = input.grad_buffer();
                          for (std::size_t i = 0; i < x.size(); ++i) {
                            if (x[i] > T(0)) dx[i] += grad[i];
                          }
                        });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& input) {
  // Outputs stay strictly inside (0, 1); in float, 1 / (1 + exp(-x)) rounds
  // to exactly 1 once x exceeds about 17.
  constexpr T lo = std::numeric_limits<T>::min();
  constexpr T hi = T(1) - std::numeric_limits<T>::epsilon() / 2;
  const auto x = input.values();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    T s;
    if (x[i] >= T(0)) {
      s = T(1) / (T(1) + std::exp(-x[i]));
    } else {
      const T e = std::exp(x[i]);
      s = e / (T(1) + e);
    }
    out[i] = std::clamp(s, lo, hi);
  }
  std::vector<T> saved = out;
  return make_result<T>(input.shape(), std::move(out), {input}, "sigmoid",
                        [input, s = std::move(saved)](std::span<const T> grad) mutable {
                          auto dx = input.grad_buffer();
                          for (std::size_t i = 0; i < s.size(); ++i) dx[i] += grad[i] * s[i] * (T(1) - s[i]);
                        });
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& input, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0, 1)");
  if (rate == 0.0) return input;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  std::bernoulli_distribution keep(1.0 - rate);
  std::vector<T> mask(input.size());
  for (auto& m : mask) m = keep(rng) ? keep_scale : T(0);
  const auto x = input.values();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * mask[i];
  return make_result<T>(input.shape(), std::move(out), {input}, "dropout",
                        [input, mask = std::move(mask)](std::span<const T> grad) mutable {
                          auto dx = input.grad_buffer();
                          for (std::size_t i = 0; i < mask.size(); ++i) dx[i] += grad[i] * mask[i];
                        });
}

template <typename T>
Tensor<T> l1_distance(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("l1_distance", a, b);
  const auto av = a.values(), bv = b.values();
  T acc = 0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += std::abs(av[i] - bv[i]);
  return make_result<T>(Shape{1}, {acc}, {a, b}, "l1_distance",
                        [a, b](std::span<const T> grad) mutable {
                          const auto av = a.values(), bv = b.values();
                          const T g = grad[0];
                          std::span<T> da = a.requires_grad() ? a.grad_buffer() : std::span<T>{};
                          std::span<T> db = b.requires_grad() ? b.grad_buffer() : std::span<T>{};
                          for (std::size_t i = 0; i < av.size(); ++i) {
                            const T diff = av[i] - bv[i];
                            const T s = diff > T(0) ? T(1) : (diff < T(0) ? T(-1) : T(0));
                            if (!da.empty()) da[i] += g * s;
                            if (!db.empty()) db[i] -= g * s;
                          }
                        });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a, b);
  const auto av = a.values(), bv = b.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, "add",
                        [a, b](std::span<const T> grad) mutable {
                          for (const Tensor<T>* t : {&a, &b}) {
                            if (!t->requires_grad()) continue;
                            auto d = t->grad_buffer();
                            for (std::size_t i = 0; i < grad.size(); ++i) d[i] += grad[i];
                          }
                        });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a, b);
  const auto av = a.values(), bv = b.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, "mul",
                        [a, b](std::span<const T> grad) mutable {
                          const auto av = a.values(), bv = b.values();
                          if (a.requires_grad()) {
                            auto d = a.grad_buffer();
                            for (std::size_t i = 0; i < grad.size(); ++i) d[i] += grad[i] * bv[i];
                          }
                          if (b.requires_grad()) {
                            auto d = b.grad_buffer();
                            for (std::size_t i = 0; i < grad.size(); ++i) d[i] += grad[i] * av[i];
                          }
                        });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T alpha) {
  const auto av = a.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = alpha * av[i];
  return make_result<T>(a.shape(), std::move(out), {a}, "scale",
                        [a, alpha](std::span<const T> grad) mutable {
                          auto d = a.grad_buffer();
                          for (std::size_t i = 0; i < grad.size(); ++i) d[i] += alpha * grad[i];
                        });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T acc = 0;
  for (T v : a.values()) acc += v;
  return make_result<T>(Shape{1}, {acc}, {a}, "sum", [a](std::span<const T> grad) mutable {
    auto d = a.grad_buffer();
    for (auto& v : d) v += grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.size()));
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (numel(shape) != a.size()) shape_error("reshape", "element counts differ", a.shape(), shape);
  std::vector<T> out(a.values().begin(), a.values().end());
  return make_result<T>(std::move(shape), std::move(out), {a}, "reshape",
                        [a](std::span<const T> grad) mutable {
                          auto d = a.grad_buffer();
                          for (std::size_t i = 0; i < grad.size(); ++i) d[i] += grad[i];
                        });
}

template <typename T>
Tensor<T> flatten(const Tensor<T>& a) {
  if (a.rank() < 1) throw std::invalid_argument("flatten: rank-0 tensor");
  return reshape(a, Shape{a.dim(0), a.size() / a.dim(0)});
}

template <typename T>
Tensor<T> concat_cols(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank("concat_cols", a, 2, "left");
  require_rank("concat_cols", b, 2, "right");
  if (a.dim(0) != b.dim(0)) shape_error("concat_cols", "row counts differ", a.shape(), b.shape());
  const std::size_t rows = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  std::vector<T> out(rows * (ca + cb));
  const auto av = a.values(), bv = b.values();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.data() + r * ca, ca, out.data() + r * (ca + cb));
    std::copy_n(bv.data() + r * cb, cb, out.data() + r * (ca + cb) + ca);
  }
  return make_result<T>(Shape{rows, ca + cb}, std::move(out), {a, b}, "concat_cols",
                        [a, b, rows, ca, cb](std::span<const T> grad) mutable {
                          if (a.requires_grad()) {
                            auto d = a.grad_buffer();
                            for (std::size_t r = 0; r < rows; ++r)
                              for (std::size_t j = 0; j < ca; ++j) d[r * ca + j] += grad[r * (ca + cb) + j];
                          }
                          if (b.requires_grad()) {
                            auto d = b.grad_buffer();
                            for (std::size_t r = 0; r < rows; ++r)
                              for (std::size_t j = 0; j < cb; ++j) d[r * cb + j] += grad[r * (ca + cb) + ca + j];
                          }
                        });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& a, const std::vector<std::size_t>& rows) {
  require_rank("gather_rows", a, 2, "input");
  if (rows.empty()) throw std::invalid_argument("gather_rows: no rows requested");
  const std::size_t cols = a.dim(1);
  std::vector<T> out(rows.size() * cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= a.dim(0)) {
      throw std::out_of_range("gather_rows: row " + std::to_string(rows[r]) + " outside " +
                              shape_str(a.shape()));
    }
    std::copy_n(a.values().data() + rows[r] * cols, cols, out.data() + r * cols);
  }
  return make_result<T>(Shape{rows.size(), cols}, std::move(out), {a}, "gather_rows",
                        [a, rows, cols](std::span<const T> grad) mutable {
                          auto d = a.grad_buffer();
                          for (std::size_t r = 0; r < rows.size(); ++r)
                            for (std::size_t j = 0; j < cols; ++j) d[rows[r] * cols + j] += grad[r * cols + j];
                        });
}

template <typename T>
Tensor<T> stack_scalars(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("stack_scalars: nothing to stack");
  std::vector<T> out;
  out.reserve(parts.size());
  for (const auto& p : parts) out.push_back(p.item());
  return make_result<T>(Shape{parts.size()}, std::move(out), parts, "stack_scalars",
                        [parts](std::span<const T> grad) mutable {
                          for (std::size_t i = 0; i < parts.size(); ++i) {
                            if (parts[i].requires_grad()) parts[i].grad_buffer()[0] += grad[i];
                          }
                        });
}

#define PVSN_INSTANTIATE_OPS(T)                                                                   \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t,    \
                            std::size_t);                                                         \
  template Tensor<T> maxpool2d(const Tensor<T>&, std::size_t, std::size_t);                       \
  template Tensor<T> batchnorm2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,            \
                                 BatchNormState<T>&, const BatchNormOptions&, bool);              \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                \
  template Tensor<T> relu(const Tensor<T>&);                                                      \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                   \
  template Tensor<T> dropout(const Tensor<T>&, double, std::mt19937_64&);                         \
  template Tensor<T> l1_distance(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> scale(const Tensor<T>&, T);                                                  \
  template Tensor<T> sum(const Tensor<T>&);                                                       \
  template Tensor<T> mean(const Tensor<T>&);                                                      \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                            \
  template Tensor<T> flatten(const Tensor<T>&);                                                   \
  template Tensor<T> concat_cols(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> gather_rows(const Tensor<T>&, const std::vector<std::size_t>&);              \
  template Tensor<T> stack_scalars(const std::vector<Tensor<T>>&);

PVSN_INSTANTIATE_OPS(float)
PVSN_INSTANTIATE_OPS(double)

}  // namespace pvsn
