#ifndef PVSN_PIPELINE_HPP
#define PVSN_PIPELINE_HPP

#include <filesystem>
#include <vector>

#include "pvsn/config.hpp"
#include "pvsn/data.hpp"
#include "pvsn/eval.hpp"
#include "pvsn/train.hpp"

namespace pvsn {

struct RunOutcome {
  Partition parts;
  TrainResult trained;
  std::vector<PairScore> test_scores;
  MetricsReport test_report;  // threshold 0.5 on test_scores
};

Partition partition(const Dataset& dataset, const RunConfig& config);

/// Partition, train on the fit subjects, then score balanced pairs drawn
/// from the held-out test subjects.
RunOutcome run_experiment(const RunConfig& config, const Dataset& dataset, const EpochCallback& on_epoch = {});

/// Writes model.pvsn, history.csv and config.txt into `dir`.
void save_run(const RunConfig& config, const RunOutcome& outcome, const std::filesystem::path& dir);

}  // namespace pvsn

#endif  // PVSN_PIPELINE_HPP
