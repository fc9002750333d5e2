// pvsn: synthetic data generation, training, evaluation, four-image
// verification and gradient self-checks for the dual-palm siamese verifier.
//
// Exit codes: 0 ok / genuine, 1 runtime error, 2 usage error, 3 imposter,
// 4 gradient self-check failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "pvsn/checkpoint.hpp"
#include "pvsn/config.hpp"
#include "pvsn/data.hpp"
#include "pvsn/eval.hpp"
#include "pvsn/gradcheck.hpp"
#include "pvsn/pipeline.hpp"
#include "pvsn/synth.hpp"
#include "pvsn/train.hpp"

namespace fs = std::filesystem;
using namespace pvsn;

namespace {

constexpr int kRuntimeError = 1;
constexpr int kUsageError = 2;
constexpr int kImposter = 3;
constexpr int kSelfCheckFailed = 4;

struct SynthArgs {
  std::size_t subjects = 20, sessions = 2, instances = 3;
  std::uint64_t seed = 7;
  std::string out;
};

int run_synth(const SynthArgs& a) {
  const auto d = synth_generate({a.subjects, a.sessions, a.instances, a.seed}, fs::path(a.out));
  std::cout << "samples " << d.samples.size() << "\nsubjects " << d.subjects().size() << "\nmanifest "
            << (fs::path(a.out) / "manifest.txt").string() << " (" << d.provenance << ")\n";
  return 0;
}

struct TrainArgs {
  std::string config, data, loss, out;
  std::optional<std::size_t> n, episodes, epochs;
  std::optional<double> margin;
  std::optional<std::uint64_t> seed;
};

int run_train(const TrainArgs& a) {
  RunConfig rc;
  if (!a.config.empty()) rc = apply_config(read_config(a.config));
  if (!a.data.empty()) rc.data = a.data;
  if (!a.out.empty()) rc.out = a.out;
  if (!a.loss.empty()) rc.train.loss = parse_loss(a.loss);
  if (a.n) rc.train.n = *a.n;
  if (a.seed) rc.train.seed = *a.seed;
  if (a.margin) rc.train.margin = *a.margin;
  if (a.episodes) rc.train.episodes_per_epoch = *a.episodes;
  if (a.epochs) rc.train.max_epochs = *a.epochs;
  if (rc.data.empty() || rc.out.empty()) throw CLI::ValidationError("train", "--data and --out are required");
  rc.train.validate();

  const auto dataset = load_dataset(rc.data);
  for (const auto& w : dataset.warnings) std::cerr << "warning: " << w << "\n";
  const auto outcome = run_experiment(rc, dataset, [](const EpochRecord& r) {
    std::fprintf(stderr, "epoch %zu  train_loss %.6f  val_loss %.6f  val_acc %.3f  lr %.2g\n", r.epoch, r.train_loss,
                 r.val_loss, r.val_accuracy, r.lr);
  });
  save_run(rc, outcome, rc.out);
  const auto& p = outcome.parts;
  std::cout << "subjects " << p.fit.subjects().size() << " train, " << p.validation.subjects().size()
            << " validation, " << p.test.subjects().size() << " test\n"
            << "best_epoch " << outcome.trained.history.best_epoch << " (" << outcome.trained.history.stop_reason
            << ")\n"
            << kMetricsCsvHeader << "\n"
            << metrics_csv_row(outcome.test_report) << "\n";
  return 0;
}

struct EvalArgs {
  std::string model, data, config, sweep;
  std::optional<std::size_t> n_pairs;
  double threshold = 0.5;
  std::optional<std::uint64_t> seed;
};

int run_eval(const EvalArgs& a) {
  // The split must match training: take its config from --config, else
  // from config.txt beside the checkpoint.
  RunConfig rc;
  fs::path cfg = a.config.empty() ? fs::path(a.model).parent_path() / "config.txt" : fs::path(a.config);
  if (fs::exists(cfg)) rc = apply_config(read_config(cfg));
  const std::string data = a.data.empty() ? rc.data : a.data;
  if (data.empty()) throw CLI::ValidationError("eval", "--data is required");

  auto params = load_checkpoint(a.model);
  const auto dataset = load_dataset(data);
  const auto test_split = partition(dataset, rc).test;
  const EvalOptions opts{a.n_pairs.value_or(rc.test_pairs_per_class), a.threshold, a.seed.value_or(rc.split_seed)};
  std::vector<MetricsReport> reports;
  if (!a.sweep.empty()) {
    reports = threshold_sweep(params, test_split, parse_sweep(a.sweep), opts);
  } else {
    reports.push_back(evaluate(params, test_split, opts));
  }
  std::cout << kMetricsCsvHeader << "\n";
  for (auto& r : reports) {
    r.loss = rc.train.loss;
    r.n = rc.train.n;
    std::cout << metrics_csv_row(r) << "\n";
  }
  return 0;
}

struct VerifyArgs {
  std::string model, left_a, right_a, left_b, right_b;
  double threshold = 0.5;
};

int run_verify(const VerifyArgs& a) {
  auto params = load_checkpoint(a.model);
  auto load = [](const std::string& p) {
    const auto raw = read_image(p);
    return roi_preprocess(raw.image, raw.max_value);
  };
  const auto r = verify(params, load(a.left_a), load(a.right_a), load(a.left_b), load(a.right_b), a.threshold);
  const bool genuine = r.decision == Decision::Genuine;
  std::printf("distance %.6f\nprobability %.6f\ndecision %s\n", r.distance, r.probability,
              genuine ? "GENUINE" : "IMPOSTER");
  return genuine ? 0 : kImposter;
}

int run_gradcheck(std::uint64_t seed, const std::string& perturb) {
  GradCheckOptions opts;
  opts.seed = seed;
  if (!perturb.empty()) opts.perturb = perturb;
  bool ok = true;
  for (const auto& r : run_gradcheck_suite(opts)) {
    std::printf("%-18s max_rel_error %.3e  tol %.0e  %s\n", r.op.c_str(), r.max_relative_error, r.tolerance,
                r.passed() ? "ok" : "FAILED");
    if (!r.passed()) {
      std::fprintf(stderr, "gradient check failed: %s\n", r.op.c_str());
      ok = false;
    }
  }
  return ok ? 0 : kSelfCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-palm siamese palm-vein verification"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic palm-vein dataset");
  synth->add_option("--subjects", synth_args.subjects)->check(CLI::PositiveNumber);
  synth->add_option("--sessions", synth_args.sessions)->check(CLI::PositiveNumber);
  synth->add_option("--instances", synth_args.instances)->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_args.seed);
  synth->add_option("--out", synth_args.out)->required();

  TrainArgs train_args;
  auto* trn = app.add_subcommand("train", "Train on a dataset directory (70:30 subject split)");
  trn->add_option("--config", train_args.config)->check(CLI::ExistingFile);
  trn->add_option("--data", train_args.data);
  trn->add_option("--loss", train_args.loss)->check(CLI::IsMember({"contrastive", "bce", "cross-entropy"}));
  trn->add_option("--n", train_args.n)->check(CLI::PositiveNumber);
  trn->add_option("--seed", train_args.seed);
  trn->add_option("--margin", train_args.margin, "Contrastive margin")->check(CLI::PositiveNumber);
  trn->add_option("--episodes", train_args.episodes, "Episodes per epoch")->check(CLI::PositiveNumber);
  trn->add_option("--epochs", train_args.epochs, "Maximum epochs")->check(CLI::PositiveNumber);
  trn->add_option("--out", train_args.out);

  EvalArgs eval_args;
  auto* evl = app.add_subcommand("eval", "Evaluate a checkpoint on the held-out subjects");
  evl->add_option("--model", eval_args.model)->required();
  evl->add_option("--data", eval_args.data);
  evl->add_option("--config", eval_args.config);
  evl->add_option("--n-pairs", eval_args.n_pairs, "Query pairs per class (default: the run's test_pairs_per_class)")->check(CLI::PositiveNumber);
  evl->add_option("--threshold", eval_args.threshold)->check(CLI::Range(0.0, 1.0));
  evl->add_option("--sweep", eval_args.sweep, "Threshold grid lo:hi:step");
  evl->add_option("--seed", eval_args.seed, "Pair sampling seed (default: split_seed of the run)");

  VerifyArgs verify_args;
  auto* ver = app.add_subcommand("verify", "Compare user A's two palm images against user B's");
  ver->add_option("--model", verify_args.model)->required();
  ver->add_option("--left-a", verify_args.left_a)->required();
  ver->add_option("--right-a", verify_args.right_a)->required();
  ver->add_option("--left-b", verify_args.left_b)->required();
  ver->add_option("--right-b", verify_args.right_b)->required();
  ver->add_option("--threshold", verify_args.threshold)->check(CLI::Range(0.0, 1.0));

  std::uint64_t gc_seed = 0;
  std::string gc_perturb;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every backward rule (64-bit)");
  gc->add_option("--seed", gc_seed);
  gc->add_option("--perturb", gc_perturb, "Corrupt one check's analytic gradient (negative control)")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kUsageError;
  }

  try {
    if (*synth) return run_synth(synth_args);
    if (*trn) return run_train(train_args);
    if (*evl) return run_eval(eval_args);
    if (*ver) return run_verify(verify_args);
    if (*gc) return run_gradcheck(gc_seed, gc_perturb);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return 0;
}
