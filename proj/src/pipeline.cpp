#include "pvsn/pipeline.hpp"

#include <fstream>
#include <stdexcept>

#include "pvsn/checkpoint.hpp"

namespace pvsn {

Partition partition(const Dataset& dataset, const RunConfig& config) {
  return partition(dataset, {config.train_fraction, config.split_seed}, config.val_fraction);
}

RunOutcome run_experiment(const RunConfig& config, const Dataset& dataset, const EpochCallback& on_epoch) {
  RunOutcome out;
  out.parts = partition(dataset, config);
  out.trained = train(config.train, out.parts.fit, out.parts.validation, on_epoch);
  const auto pairs = sample_query_pairs(out.parts.test, config.test_pairs_per_class, config.split_seed);
  out.test_scores = score_pairs(out.trained.params, out.parts.test, pairs);
  out.test_report = report_from_scores(out.test_scores, 0.5);
  out.test_report.loss = config.train.loss;
  out.test_report.n = config.train.n;
  return out;
}

void save_run(const RunConfig& config, const RunOutcome& outcome, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_checkpoint(outcome.trained.params, dir / "model.pvsn");
  std::ofstream history(dir / "history.csv", std::ios::binary | std::ios::trunc);
  history << history_csv(outcome.trained.history);
  if (!history) throw std::runtime_error("cannot write " + (dir / "history.csv").string());
  write_config(dir / "config.txt", to_key_values(config));
}

}  // namespace pvsn
