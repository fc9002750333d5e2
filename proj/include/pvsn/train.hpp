#ifndef PVSN_TRAIN_HPP
#define PVSN_TRAIN_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pvsn/data.hpp"
#include "pvsn/eval.hpp"
#include "pvsn/losses.hpp"
#include "pvsn/model.hpp"
#include "pvsn/optim.hpp"

namespace pvsn {

struct TrainConfig {
  LossKind loss = LossKind::Contrastive;
  double margin = 1.0;
  AdamConfig adam{};  // lr 1e-4
  std::size_t n = 5;  // shots; k is fixed at 2 (genuine vs imposter)
  std::size_t episodes_per_epoch = 100;
  std::size_t max_epochs = 50;
  std::size_t plateau_patience = 3;
  double plateau_factor = 0.5;
  double min_delta = 1e-4;
  double min_lr = 1e-6;
  std::size_t early_stop_patience = 7;
  double dropout = 0.3;
  std::size_t val_pairs_per_class = 100;
  std::size_t calibration_pairs_per_class = 200;
  std::uint64_t seed = 1;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_accuracy = 0;
  double lr = 0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  std::string stop_reason;
};

struct TrainResult {
  SiameseParams<float> params;  // best-validation snapshot
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Episodic training: each episode is one Adam step over the mean loss of
/// 2n balanced pairs. After every epoch the validation subjects calibrate
/// the head (contrastive only) and their pairs drive the plateau scheduler
/// and the early stopper. Deterministic per config.seed.
TrainResult train(const TrainConfig& config, const Dataset& train_split, const Dataset& val_split,
                  const EpochCallback& on_epoch = {});

/// Fits theta0 (theta1 fixed at -1) so that p >= 0.5 exactly when d is at or
/// below a cut between the genuine and imposter distance distributions of
/// the given pairs (equal standardized distance in log space).
void calibrate_head(SiameseParams<float>& params, const Dataset& dataset, const std::vector<PairExample>& pairs);

/// Mean per-pair loss in inference mode.
double pair_loss(const TrainConfig& config, SiameseParams<float>& params, const Dataset& dataset,
                 const std::vector<PairExample>& pairs);
double pair_loss(const TrainConfig& config, const SiameseParams<float>& params, const std::vector<PairScore>& scores);

inline constexpr const char* kHistoryCsvHeader = "epoch,train_loss,val_loss,val_accuracy,lr";
std::string history_csv(const TrainHistory& history);

}  // namespace pvsn

#endif  // PVSN_TRAIN_HPP
