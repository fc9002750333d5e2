#include "pvsn/train.hpp"

#include <algorithm>
#include <cmath>
#if defined(__GLIBC__)
#include <malloc.h>
#endif
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>

#include "pvsn/eval.hpp"

namespace pvsn {

void TrainConfig::validate() const {
  if (!(adam.lr > 0)) throw std::invalid_argument("learning rate must be positive");
  if (!(plateau_factor > 0 && plateau_factor < 1)) throw std::invalid_argument("plateau factor must be in (0, 1)");
  if (!(margin > 0)) throw std::invalid_argument("margin must be positive");
  if (n < 1) throw std::invalid_argument("n must be at least 1");
  if (episodes_per_epoch < 1 || max_epochs < 1) throw std::invalid_argument("episodes and epochs must be >= 1");
  if (dropout < 0 || dropout >= 1) throw std::invalid_argument("dropout must be in [0, 1)");
}

namespace {

Tensor<float> scalar_loss(const TrainConfig& config, const SiameseParams<float>& params, const Tensor<float>& d,
                          bool genuine) {
  if (config.loss == LossKind::Contrastive) return contrastive_loss(d, genuine, params.margin);
  return bce_with_logits_loss(add(params.theta0, mul(params.theta1, d)), genuine);
}

void check_inputs(const TrainConfig& config, const Dataset& train_split, const Dataset& val_split) {
  if (train_split.samples.empty()) throw std::invalid_argument("train: empty training split");
  if (val_split.samples.empty()) throw std::invalid_argument("train: empty validation split");
  const auto tr = train_split.subjects();
  const auto va = val_split.subjects();
  std::vector<std::string> both;
  std::set_intersection(tr.begin(), tr.end(), va.begin(), va.end(), std::back_inserter(both));
  if (!both.empty()) throw std::invalid_argument("train: subject " + both.front() + " is in both splits");
  std::size_t distinct_genuine = 0;
  for (const auto& g : train_split.groups()) distinct_genuine += g.size() * (g.size() - 1) / 2;
  if (config.n > distinct_genuine) {
    throw std::invalid_argument("train: n = " + std::to_string(config.n) + " exceeds the " +
                                std::to_string(distinct_genuine) + " distinct genuine pairs in the training split");
  }
  // Both splits must support pair sampling.
  std::mt19937_64 probe(0);
  sample_episode(train_split, 1, probe);
  sample_episode(val_split, 1, probe);
}

/// One optimizer step over an episode; returns the mean pair loss.
double train_episode(const TrainConfig& config, SiameseParams<float>& params, Adam<float>& adam,
                     std::vector<SiameseParams<float>::Named>& trainable, const Dataset& data,
                     const std::vector<PairExample>& pairs, std::mt19937_64& rng) {
  std::vector<std::size_t> unique;
  for (const auto& p : pairs) {
    unique.push_back(p.a);
    unique.push_back(p.b);
  }
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  std::map<std::size_t, std::size_t> row;
  for (std::size_t i = 0; i < unique.size(); ++i) row[unique[i]] = i;

  const std::size_t side = params.arch.input_size, image = side * side, u = unique.size();
  std::vector<float> pix(2 * u * image);
  for (std::size_t i = 0; i < u; ++i) {
    const Sample& s = data.samples[unique[i]];
    std::copy(s.left.pixels.begin(), s.left.pixels.end(), pix.begin() + static_cast<std::ptrdiff_t>(i * image));
    std::copy(s.right.pixels.begin(), s.right.pixels.end(), pix.begin() + static_cast<std::ptrdiff_t>((u + i) * image));
  }
  ForwardMode mode;
  mode.training = true;
  mode.dropout_rate = config.dropout;
  mode.rng = &rng;
  const auto feats = extract_features(params, Tensor<float>({2 * u, 1, side, side}, std::move(pix)), mode);
  std::vector<std::size_t> lefts(u), rights(u);
  for (std::size_t i = 0; i < u; ++i) {
    lefts[i] = i;
    rights[i] = u + i;
  }
  const auto fused = fuse(gather_rows(feats, lefts), gather_rows(feats, rights));

  std::vector<Tensor<float>> losses;
  for (const auto& p : pairs) {
    const auto d = pair_distance(gather_rows(fused, {row[p.a]}), gather_rows(fused, {row[p.b]}));
    losses.push_back(scalar_loss(config, params, d, p.genuine));
  }
  const auto loss = mean(stack_scalars(losses));
  params.zero_grad();
  // A block whose units are all inactive gets no gradient; it still steps.
  for (auto& [name, t] : trainable) t.grad_buffer();
  loss.backward();
  adam.step(trainable);
  return loss.item();
}

}  // namespace

void calibrate_head(SiameseParams<float>& params, const Dataset& dataset, const std::vector<PairExample>& pairs) {
  const auto scores = score_pairs(params, dataset, pairs);
  // Log-normal fit per class; the cut sits where both classes are the same
  // number of standard deviations away. A gap-midpoint stump over-fits the
  // few closest imposter pairs of a small validation split.
  struct Moments {
    double n = 0, sum = 0, sq = 0;
    void add(double v) { n += 1, sum += v, sq += v * v; }
    double mean() const { return sum / n; }
    double sd() const { return std::sqrt(std::max(0.0, sq / n - mean() * mean())); }
  } gen, imp;
  for (const auto& s : scores) (s.genuine ? gen : imp).add(std::log(std::max(s.distance, 1e-6)));
  if (gen.n == 0 || imp.n == 0) throw std::invalid_argument("calibrate_head: need both pair classes");
  const double sg = gen.sd(), si = imp.sd();
  const double log_cut = sg + si > 0 ? (gen.mean() * si + imp.mean() * sg) / (sg + si)
                                     : 0.5 * (gen.mean() + imp.mean());
  params.theta1.values()[0] = -1.0f;
  params.theta0.values()[0] = static_cast<float>(std::exp(log_cut));
}

double pair_loss(const TrainConfig& config, SiameseParams<float>& params, const Dataset& dataset,
                 const std::vector<PairExample>& pairs) {
  return pair_loss(config, params, score_pairs(params, dataset, pairs));
}

double pair_loss(const TrainConfig& config, const SiameseParams<float>& params, const std::vector<PairScore>& scores) {
  NoGradGuard no_grad;
  double total = 0;
  for (const auto& s : scores) {
    const auto d = Tensor<float>::scalar(static_cast<float>(s.distance));
    total += scalar_loss(config, params, d, s.genuine).item();
  }
  return total / static_cast<double>(scores.size());
}

TrainResult train(const TrainConfig& config, const Dataset& train_split, const Dataset& val_split,
                  const EpochCallback& on_epoch) {
  config.validate();
#if defined(__GLIBC__)
  // Activations are tens of MB and recycled every episode; keep them out of
  // mmap so each step does not pay for fresh zeroed pages.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  check_inputs(config, train_split, val_split);

  auto params = init_params<float>(config.seed, Architecture::full(), static_cast<float>(config.margin));
  std::mt19937_64 rng(config.seed);
  auto trainable = params.extractor_parameters();
  if (config.loss == LossKind::CrossEntropy) {
    for (auto& h : params.head_parameters()) trainable.push_back(h);
  }
  Adam<float> adam(config.adam);
  PlateauScheduler scheduler(config.adam.lr, config.plateau_patience, config.plateau_factor, config.min_delta,
                             config.min_lr);
  EarlyStopper stopper(config.early_stop_patience, config.min_delta);

  const auto val_pairs = sample_query_pairs(val_split, config.val_pairs_per_class, config.seed + 1);
  const auto calib_pairs = sample_query_pairs(val_split, config.calibration_pairs_per_class, config.seed + 2);

  TrainResult result{params.clone(), {}};
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const double lr = adam.lr();
    double total = 0;
    for (std::size_t e = 0; e < config.episodes_per_epoch; ++e) {
      const auto pairs = sample_episode(train_split, config.n, rng);
      total += train_episode(config, params, adam, trainable, train_split, pairs, rng);
    }
    if (config.loss == LossKind::Contrastive) calibrate_head(params, val_split, calib_pairs);

    const auto val_scores = score_pairs(params, val_split, val_pairs);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = total / static_cast<double>(config.episodes_per_epoch);
    rec.val_loss = pair_loss(config, params, val_scores);
    rec.val_accuracy = report_from_scores(val_scores, 0.5).accuracy;
    rec.lr = lr;
    result.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    adam.set_lr(scheduler.step(rec.val_loss));
    const bool stop = stopper.step(rec.val_loss);
    if (stopper.improved()) {
      result.params = params.clone();
      result.history.best_epoch = epoch;
    }
    if (stop) {
      result.history.stop_reason = "early_stop";
      break;
    }
  }
  if (result.history.stop_reason.empty()) result.history.stop_reason = "max_epochs";
  return result;
}

std::string history_csv(const TrainHistory& history) {
  std::string out = std::string(kHistoryCsvHeader) + "\n";
  char buf[160];
  for (const auto& r : history.epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,%.6f\n", r.epoch, r.train_loss, r.val_loss, r.val_accuracy,
                  r.lr);
    out += buf;
  }
  return out;
}

}  // namespace pvsn
