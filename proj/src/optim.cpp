#include "pvsn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pvsn {

template <typename T>
void Adam<T>::step(std::vector<Named>& params) {
  if (m_.empty()) {
    for (const auto& [name, t] : params) {
      m_.emplace_back(t.size(), 0.0);
      v_.emplace_back(t.size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw std::invalid_argument("Adam: parameter list changed between steps");
  for (const auto& [name, t] : params) {
    if (!t.has_grad()) throw std::invalid_argument("Adam: missing gradient for parameter " + name);
  }
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& t = params[k].second;
    auto w = t.values();
    auto g = t.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gi;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * gi * gi;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= static_cast<T>(config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps));
    }
  }
}

template class Adam<float>;
template class Adam<double>;

PlateauScheduler::PlateauScheduler(double lr, std::size_t patience, double factor, double min_delta,
                                   double floor)
    : lr_(lr), patience_(patience), factor_(factor), min_delta_(min_delta), floor_(floor),
      best_(std::numeric_limits<double>::infinity()) {
  if (!(lr > 0)) throw std::invalid_argument("learning rate must be positive");
  if (!(factor > 0 && factor < 1)) throw std::invalid_argument("plateau factor must be in (0, 1)");
}

double PlateauScheduler::step(double validation_loss) {
  if (validation_loss < best_ - min_delta_) {
    best_ = validation_loss;
    bad_epochs_ = 0;
    return lr_;
  }
  if (++bad_epochs_ >= patience_) {
    lr_ = std::max(floor_, lr_ * factor_);
    bad_epochs_ = 0;
  }
  return lr_;
}

EarlyStopper::EarlyStopper(std::size_t patience, double min_delta)
    : patience_(patience), min_delta_(min_delta), best_(std::numeric_limits<double>::infinity()) {}

bool EarlyStopper::step(double validation_loss) {
  ++epoch_;
  improved_ = validation_loss < best_ - min_delta_;
  if (improved_) {
    best_ = validation_loss;
    best_epoch_ = epoch_;
    bad_epochs_ = 0;
    return false;
  }
  return ++bad_epochs_ >= patience_;
}

}  // namespace pvsn
