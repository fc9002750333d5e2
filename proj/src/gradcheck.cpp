#include "pvsn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "pvsn/losses.hpp"
#include "pvsn/model.hpp"
#include "pvsn/ops.hpp"

namespace pvsn {

Tensor<double> finite_diff_grad(const std::function<double(const Tensor<double>&)>& fn, Tensor<double> at,
                                double h) {
  if (!(h > 0)) throw std::invalid_argument("finite_diff_grad: step must be positive");
  Tensor<double> x = at.detach();
  std::vector<double> grad(x.size());
  auto v = x.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double orig = v[i];
    v[i] = orig + h;
    const double up = fn(x);
    v[i] = orig - h;
    const double down = fn(x);
    v[i] = orig;
    grad[i] = (up - down) / (2 * h);
  }
  return Tensor<double>(x.shape(), std::move(grad));
}

double relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("relative_error: length mismatch");
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

namespace {

using T = double;
using Inputs = std::vector<Tensor<T>>;
using Forward = std::function<Tensor<T>(const Inputs&)>;

Tensor<T> uniform_tensor(Shape shape, std::mt19937_64& rng, double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<T> v(numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor<T>(std::move(shape), std::move(v), true);
}

/// Scalar objective sum(R * f(inputs)) with a fixed random R, so every
/// output element carries a distinct weight.
class Projection {
 public:
  Projection(const Forward& f, const Inputs& inputs, std::mt19937_64& rng) : f_(f) {
    NoGradGuard no_grad;
    const auto out = f_(inputs);
    weights_ = uniform_tensor(out.shape(), rng, -1.0, 1.0);
    weights_.set_requires_grad(false);
  }
  Tensor<T> loss(const Inputs& inputs) const { return sum(mul(f_(inputs), weights_)); }

 private:
  Forward f_;
  Tensor<T> weights_;
};

double check_inputs(const Forward& f, Inputs inputs, std::mt19937_64& rng, double h, double perturb) {
  const Projection proj(f, inputs, rng);
  for (auto& t : inputs) t.zero_grad();
  proj.loss(inputs).backward();
  double worst = 0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (!inputs[k].requires_grad()) continue;
    std::vector<T> analytic(inputs[k].grad().begin(), inputs[k].grad().end());
    for (auto& g : analytic) g *= perturb;
    const auto numeric = finite_diff_grad(
        [&](const Tensor<T>& x) {
          NoGradGuard no_grad;
          Inputs moved = inputs;
          moved[k] = x;
          return proj.loss(moved).item();
        },
        inputs[k], h);
    worst = std::max(worst, relative_error(analytic, numeric.values()));
  }
  return worst;
}

/// Pushes values away from a kink so a +-h probe never crosses it.
void keep_away(Tensor<T>& t, double from, double gap) {
  for (auto& v : t.values()) {
    if (std::abs(v - from) < gap) v = from + (v < from ? -gap : gap);
  }
}

double network_check(std::mt19937_64& rng, double h, double perturb) {
  auto params = init_params<T>(rng(), Architecture::reduced(), T(10));
  const std::size_t s = params.arch.input_size;
  const std::size_t samples = 4;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<T> pix(2 * samples * s * s);
  for (auto& p : pix) p = unit(rng);
  const Tensor<T> images({2 * samples, 1, s, s}, std::move(pix));
  // (a, b, genuine) over 4 enrollments: lefts are rows 0..3, rights 4..7.
  const std::vector<std::tuple<std::size_t, std::size_t, bool>> pairs{{0, 1, true}, {2, 3, true}, {0, 2, false},
                                                                       {1, 3, false}};

  auto loss_fn = [&]() {
    ForwardMode mode;
    mode.training = true;
    mode.dropout_rate = 0.0;
    const auto feats = extract_features(params, images, mode);
    const auto fused = fuse(gather_rows(feats, {0, 1, 2, 3}), gather_rows(feats, {4, 5, 6, 7}));
    std::vector<Tensor<T>> parts;
    for (const auto& [a, b, genuine] : pairs) {
      const auto d = pair_distance(gather_rows(fused, {a}), gather_rows(fused, {b}));
      parts.push_back(contrastive_loss(d, genuine, params.margin));
      parts.push_back(bce_loss(probability(d, params.theta0, params.theta1), genuine));
    }
    return mean(stack_scalars(parts));
  };

  auto named = params.extractor_parameters();
  for (auto& hp : params.head_parameters()) named.push_back(hp);
  params.zero_grad();
  loss_fn().backward();
  double worst = 0;
  for (auto& [name, t] : named) {
    std::vector<T> analytic(t.grad().begin(), t.grad().end());
    for (auto& g : analytic) g *= perturb;
    std::vector<T> numeric(t.size());
    auto v = t.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      NoGradGuard no_grad;
      const T orig = v[i];
      v[i] = orig + h;
      const double up = loss_fn().item();
      v[i] = orig - h;
      const double down = loss_fn().item();
      v[i] = orig;
      numeric[i] = (up - down) / (2 * h);
    }
    worst = std::max(worst, relative_error(analytic, numeric));
  }
  return worst;
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(const GradCheckOptions& options) {
  std::mt19937_64 rng(options.seed);
  const double h = options.step;
  auto factor = [&](const std::string& name) { return options.perturb && *options.perturb == name ? 1.01 : 1.0; };
  std::vector<GradCheckResult> results;
  auto record = [&](const std::string& name, double err, double tol) { results.push_back({name, err, tol}); };

  {
    double err = 0;
    for (auto [stride, padding] : {std::pair<std::size_t, std::size_t>{1, 1}, {2, 0}}) {
      Inputs in{uniform_tensor({2, 3, 7, 7}, rng), uniform_tensor({4, 3, 3, 3}, rng), uniform_tensor({4}, rng)};
      err = std::max(err, check_inputs([=](const Inputs& x) { return conv2d(x[0], x[1], x[2], stride, padding); },
                                       in, rng, h, factor("conv2d")));
    }
    record("conv2d", err, options.op_tolerance);
  }
  {
    // Distinct values spaced well beyond h keep the argmax stable.
    auto x = uniform_tensor({2, 3, 7, 7}, rng);
    std::vector<std::size_t> order(x.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < order.size(); ++i) {
      x.values()[order[i]] = -2.0 + 4.0 * static_cast<double>(i) / static_cast<double>(order.size());
    }
    record("maxpool2d",
           check_inputs([](const Inputs& in) { return maxpool2d(in[0], 2, 2); }, {x}, rng, h, factor("maxpool2d")),
           options.op_tolerance);
  }
  {
    Inputs in{uniform_tensor({2, 3, 4, 4}, rng), uniform_tensor({3}, rng), uniform_tensor({3}, rng)};
    auto state = std::make_shared<BatchNormState<T>>(3);
    record("batchnorm2d",
           check_inputs([state](const Inputs& x) { return batchnorm2d(x[0], x[1], x[2], *state, {}, true); }, in, rng,
                        h, factor("batchnorm2d")),
           options.op_tolerance);
  }
  {
    Inputs in{uniform_tensor({2, 5}, rng), uniform_tensor({4, 5}, rng), uniform_tensor({4}, rng)};
    record("linear",
           check_inputs([](const Inputs& x) { return linear(x[0], x[1], x[2]); }, in, rng, h, factor("linear")),
           options.op_tolerance);
  }
  {
    auto x = uniform_tensor({3, 7}, rng);
    keep_away(x, 0.0, 1e-3);
    record("relu", check_inputs([](const Inputs& in) { return relu(in[0]); }, {x}, rng, h, factor("relu")),
           options.op_tolerance);
  }
  {
    record("sigmoid",
           check_inputs([](const Inputs& in) { return sigmoid(in[0]); }, {uniform_tensor({3, 7}, rng)}, rng, h,
                        factor("sigmoid")),
           options.op_tolerance);
  }
  {
    auto a = uniform_tensor({128}, rng);
    auto b = uniform_tensor({128}, rng);
    for (std::size_t i = 0; i < 128; ++i) {
      if (std::abs(a.values()[i] - b.values()[i]) < 1e-3) a.values()[i] += 2e-3;
    }
    record("l1_distance",
           check_inputs([](const Inputs& in) { return l1_distance(in[0], in[1]); }, {a, b}, rng, h,
                        factor("l1_distance")),
           options.op_tolerance);
  }
  {
    double err = 0;
    std::uniform_real_distribution<double> dist(0.0, 2.0);
    for (int i = 0; i < 8; ++i) {
      auto d = Tensor<T>::scalar(dist(rng), true);
      keep_away(d, 1.0, 1e-3);
      const bool genuine = i % 2 == 0;
      err = std::max(err, check_inputs([genuine](const Inputs& in) { return contrastive_loss(in[0], genuine, T(1)); },
                                       {d}, rng, h, factor("contrastive_loss")));
    }
    record("contrastive_loss", err, options.op_tolerance);
  }
  {
    double err = 0;
    std::uniform_real_distribution<double> dist(0.05, 0.95);
    for (int i = 0; i < 8; ++i) {
      auto p = Tensor<T>::scalar(dist(rng), true);
      const bool genuine = i % 2 == 0;
      err = std::max(err, check_inputs([genuine](const Inputs& in) { return bce_loss(in[0], genuine); }, {p}, rng, h,
                                       factor("bce_loss")));
    }
    record("bce_loss", err, options.op_tolerance);
  }
  record("siamese_network", network_check(rng, h, factor("siamese_network")), options.network_tolerance);
  return results;
}

}  // namespace pvsn
