#include "pvsn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <stdexcept>
#include <tuple>

namespace pvsn {

namespace fs = std::filesystem;

std::vector<std::string> Dataset::subjects() const {
  std::set<std::string> ids;
  for (const auto& s : samples) ids.insert(s.subject_id);
  return {ids.begin(), ids.end()};
}

std::vector<std::vector<std::size_t>> Dataset::groups() const {
  const auto ids = subjects();
  std::map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < ids.size(); ++i) slot[ids[i]] = i;
  std::vector<std::vector<std::size_t>> out(ids.size());
  for (std::size_t i = 0; i < samples.size(); ++i) out[slot[samples[i].subject_id]].push_back(i);
  return out;
}

Dataset Dataset::subset(const std::vector<std::string>& subject_ids) const {
  const std::set<std::string> keep(subject_ids.begin(), subject_ids.end());
  Dataset out;
  out.provenance = provenance;
  for (const auto& s : samples) {
    if (keep.count(s.subject_id)) out.samples.push_back(s);
  }
  return out;
}

std::optional<std::uint64_t> Dataset::synthetic_seed() const {
  const std::string prefix = "synthetic:";
  if (provenance.rfind(prefix, 0) != 0) return std::nullopt;
  return std::stoull(provenance.substr(prefix.size()));
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0 && spec.train_fraction < 1)) {
    throw std::invalid_argument("split: train fraction must be in (0, 1)");
  }
  auto ids = dataset.subjects();
  if (ids.size() < 2) throw std::invalid_argument("split: need at least 2 subjects, got " + std::to_string(ids.size()));
  std::mt19937_64 rng(spec.seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  // The epsilon keeps e.g. 0.7 * 10 from rounding up to 8.
  const auto n_train =
      static_cast<std::size_t>(std::ceil(spec.train_fraction * static_cast<double>(ids.size()) - 1e-9));
  if (n_train == 0 || n_train >= ids.size()) {
    throw std::invalid_argument("split: " + std::to_string(ids.size()) +
                                " subjects leave one side of the split empty");
  }
  std::vector<std::string> train(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::string> test(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  return {dataset.subset(train), dataset.subset(test)};
}

Partition partition(const Dataset& dataset, const SplitSpec& spec, double val_fraction) {
  if (!(val_fraction > 0 && val_fraction < 1)) {
    throw std::invalid_argument("partition: validation fraction must be in (0, 1)");
  }
  auto [train, test] = split(dataset, spec);
  auto [fit, validation] = split(train, {1.0 - val_fraction, spec.seed});
  return {std::move(fit), std::move(validation), std::move(test)};
}

namespace {

struct PairSampler {
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> genuine_capable;

  explicit PairSampler(const Dataset& dataset) : groups(dataset.groups()) {
    if (groups.size() < 2) {
      throw std::invalid_argument("pair sampling needs at least 2 subjects, dataset has " +
                                  std::to_string(groups.size()));
    }
    for (std::size_t s = 0; s < groups.size(); ++s) {
      if (groups[s].size() >= 2) genuine_capable.push_back(s);
    }
    if (genuine_capable.empty()) {
      throw std::invalid_argument("pair sampling needs a subject with at least 2 samples");
    }
  }

  static std::size_t pick(std::size_t n, std::mt19937_64& rng) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  }

  PairExample genuine(std::mt19937_64& rng) const {
    const auto& g = groups[genuine_capable[pick(genuine_capable.size(), rng)]];
    const std::size_t i = pick(g.size(), rng);
    std::size_t j = pick(g.size() - 1, rng);
    if (j >= i) ++j;
    return {g[i], g[j], true};
  }

  PairExample imposter(std::mt19937_64& rng) const {
    const std::size_t s = pick(groups.size(), rng);
    std::size_t t = pick(groups.size() - 1, rng);
    if (t >= s) ++t;
    return {groups[s][pick(groups[s].size(), rng)], groups[t][pick(groups[t].size(), rng)], false};
  }
};

}  // namespace

std::vector<PairExample> sample_episode(const Dataset& dataset, std::size_t n, std::mt19937_64& rng) {
  if (n == 0) throw std::invalid_argument("sample_episode: n must be at least 1");
  const PairSampler sampler(dataset);
  std::vector<PairExample> pairs;
  pairs.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) pairs.push_back(sampler.genuine(rng));
  for (std::size_t i = 0; i < n; ++i) pairs.push_back(sampler.imposter(rng));
  std::shuffle(pairs.begin(), pairs.end(), rng);
  return pairs;
}

std::vector<PairExample> sample_query_pairs(const Dataset& dataset, std::size_t per_class,
                                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_episode(dataset, per_class, rng);
}

namespace {

void warn(Dataset& d, std::string message) { d.warnings.push_back(std::move(message)); }

std::map<std::string, std::string> read_manifest(const fs::path& root) {
  std::map<std::string, std::string> kv;
  std::ifstream f(root / "manifest.txt");
  std::string line;
  while (std::getline(f, line)) {
    const auto eq = line.find('=');
    if (line.empty() || line[0] == '#' || eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

std::vector<fs::path> sorted_dirs(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

Dataset load_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw std::runtime_error("dataset root is not a directory: " + root.string());
  Dataset d;
  const auto manifest = read_manifest(root);
  if (auto it = manifest.find("provenance"); it != manifest.end()) d.provenance = it->second;

  static const std::regex file_re(R"(([LR])_(\d+)\.(png|pgm|PNG|PGM))");
  for (const auto& subject_dir : sorted_dirs(root)) {
    const std::string subject = subject_dir.filename().string();
    std::vector<Sample> found;
    for (const auto& session_dir : sorted_dirs(subject_dir)) {
      int session = 0;
      try {
        session = std::stoi(session_dir.filename().string());
      } catch (const std::exception&) {
        warn(d, "skipping non-numeric session directory " + session_dir.string());
        continue;
      }
      std::map<int, std::pair<fs::path, fs::path>> by_instance;
      for (const auto& e : fs::directory_iterator(session_dir)) {
        std::smatch m;
        const std::string name = e.path().filename().string();
        if (!e.is_regular_file() || !std::regex_match(name, m, file_re)) continue;
        auto& slot = by_instance[std::stoi(m[2].str())];
        (m[1].str() == "L" ? slot.first : slot.second) = e.path();
      }
      for (const auto& [instance, files] : by_instance) {
        if (files.first.empty() || files.second.empty()) {
          warn(d, "sample " + subject + "/" + std::to_string(session) + "/" + std::to_string(instance) +
                      " is missing its " + (files.first.empty() ? "left" : "right") + " palm; skipped");
          continue;
        }
        const auto left = read_image(files.first);
        const auto right = read_image(files.second);
        found.push_back(Sample{subject, session, instance, roi_preprocess(left.image, left.max_value),
                               roi_preprocess(right.image, right.max_value)});
      }
    }
    if (found.size() < 2) {
      warn(d, "subject " + subject + " has " + std::to_string(found.size()) +
                  " complete samples (need 2); skipped");
      continue;
    }
    std::sort(found.begin(), found.end(), [](const Sample& a, const Sample& b) {
      return std::tie(a.session, a.instance) < std::tie(b.session, b.instance);
    });
    for (auto& s : found) d.samples.push_back(std::move(s));
  }
  if (d.samples.empty()) throw std::runtime_error("no usable subjects under " + root.string());
  return d;
}

void write_dataset(const Dataset& dataset, const fs::path& root) {
  fs::create_directories(root);
  for (const auto& s : dataset.samples) {
    const fs::path dir = root / s.subject_id / std::to_string(s.session);
    fs::create_directories(dir);
    write_png(dir / ("L_" + std::to_string(s.instance) + ".png"), s.left);
    write_png(dir / ("R_" + std::to_string(s.instance) + ".png"), s.right);
  }
  std::ofstream m(root / "manifest.txt", std::ios::trunc);
  if (!m) throw std::runtime_error("cannot write manifest under " + root.string());
  m << "provenance = " << dataset.provenance << "\n"
    << "subjects = " << dataset.subjects().size() << "\n"
    << "samples = " << dataset.samples.size() << "\n";
}

}  // namespace pvsn
