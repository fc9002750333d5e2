#ifndef PVSN_OPTIM_HPP
#define PVSN_OPTIM_HPP

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "pvsn/tensor.hpp"

namespace pvsn {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias-corrected moments. Moment buffers are keyed by position in
/// the parameter list, which must stay the same between steps.
template <typename T>
class Adam {
 public:
  using Named = std::pair<std::string, Tensor<T>>;

  explicit Adam(AdamConfig config = {}) : config_(config) {}

  /// Updates every parameter in place. A parameter without a gradient
  /// buffer is an error naming it.
  void step(std::vector<Named>& params);

  void set_lr(double lr) { config_.lr = lr; }
  double lr() const { return config_.lr; }
  std::size_t steps() const { return t_; }

 private:
  AdamConfig config_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Multiplies the learning rate by `factor` after `patience` epochs without
/// an improvement larger than `min_delta`, never going below `floor`.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, std::size_t patience = 3, double factor = 0.5, double min_delta = 1e-4,
                   double floor = 1e-6);

  double step(double validation_loss);
  double lr() const { return lr_; }

 private:
  double lr_;
  std::size_t patience_;
  double factor_, min_delta_, floor_;
  double best_;
  std::size_t bad_epochs_ = 0;
};

/// Signals a stop after `patience` consecutive non-improving epochs and
/// remembers which epoch held the best metric.
class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience = 7, double min_delta = 1e-4);

  /// Returns true when training should stop. `improved()` tells whether the
  /// last observation set a new best.
  bool step(double validation_loss);
  bool improved() const { return improved_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best() const { return best_; }

 private:
  std::size_t patience_;
  double min_delta_;
  double best_;
  std::size_t epoch_ = 0, best_epoch_ = 0, bad_epochs_ = 0;
  bool improved_ = false;
};

}  // namespace pvsn

#endif  // PVSN_OPTIM_HPP
