#include "pvsn/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pvsn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw std::invalid_argument("config: " + key + " expects a number, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw std::invalid_argument("config: " + key + " expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

}  // namespace

KeyValues parse_config(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return kv;
}

KeyValues read_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const KeyValues& values) {
  std::string out;
  for (const auto& [k, v] : values) out += k + " = " + v + "\n";
  return out;
}

void write_config(const std::filesystem::path& path, const KeyValues& values) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write config " + path.string());
  f << format_config(values);
}

RunConfig apply_config(const KeyValues& values, RunConfig c) {
  auto& t = c.train;
  for (const auto& [k, v] : values) {
    if (k == "loss") t.loss = parse_loss(v);
    else if (k == "margin") t.margin = to_double(k, v);
    else if (k == "lr") t.adam.lr = to_double(k, v);
    else if (k == "beta1") t.adam.beta1 = to_double(k, v);
    else if (k == "beta2") t.adam.beta2 = to_double(k, v);
    else if (k == "adam_eps") t.adam.eps = to_double(k, v);
    else if (k == "k") {
      if (v != "2") throw std::invalid_argument("config: only k = 2 (genuine vs imposter) is supported");
    }
    else if (k == "n") t.n = to_uint(k, v);
    else if (k == "episodes_per_epoch") t.episodes_per_epoch = to_uint(k, v);
    else if (k == "max_epochs") t.max_epochs = to_uint(k, v);
    else if (k == "plateau_patience") t.plateau_patience = to_uint(k, v);
    else if (k == "plateau_factor") t.plateau_factor = to_double(k, v);
    else if (k == "min_delta") t.min_delta = to_double(k, v);
    else if (k == "min_lr") t.min_lr = to_double(k, v);
    else if (k == "early_stop_patience") t.early_stop_patience = to_uint(k, v);
    else if (k == "dropout") t.dropout = to_double(k, v);
    else if (k == "val_pairs_per_class") t.val_pairs_per_class = to_uint(k, v);
    else if (k == "calibration_pairs_per_class") t.calibration_pairs_per_class = to_uint(k, v);
    else if (k == "seed") t.seed = to_uint(k, v);
    else if (k == "train_fraction") c.train_fraction = to_double(k, v);
    else if (k == "val_fraction") c.val_fraction = to_double(k, v);
    else if (k == "split_seed") c.split_seed = to_uint(k, v);
    else if (k == "test_pairs_per_class") c.test_pairs_per_class = to_uint(k, v);
    else if (k == "data") c.data = v;
    else if (k == "out") c.out = v;
    else throw std::invalid_argument("config: unknown key '" + k + "'");
  }
  return c;
}

KeyValues to_key_values(const RunConfig& c) {
  const auto& t = c.train;
  return {
      {"loss", loss_name(t.loss)},
      {"margin", shortest(t.margin)},
      {"lr", shortest(t.adam.lr)},
      {"beta1", shortest(t.adam.beta1)},
      {"beta2", shortest(t.adam.beta2)},
      {"adam_eps", shortest(t.adam.eps)},
      {"k", "2"},
      {"n", std::to_string(t.n)},
      {"episodes_per_epoch", std::to_string(t.episodes_per_epoch)},
      {"max_epochs", std::to_string(t.max_epochs)},
      {"plateau_patience", std::to_string(t.plateau_patience)},
      {"plateau_factor", shortest(t.plateau_factor)},
      {"min_delta", shortest(t.min_delta)},
      {"min_lr", shortest(t.min_lr)},
      {"early_stop_patience", std::to_string(t.early_stop_patience)},
      {"dropout", shortest(t.dropout)},
      {"val_pairs_per_class", std::to_string(t.val_pairs_per_class)},
      {"calibration_pairs_per_class", std::to_string(t.calibration_pairs_per_class)},
      {"seed", std::to_string(t.seed)},
      {"train_fraction", shortest(c.train_fraction)},
      {"val_fraction", shortest(c.val_fraction)},
      {"split_seed", std::to_string(c.split_seed)},
      {"test_pairs_per_class", std::to_string(c.test_pairs_per_class)},
      {"data", c.data},
      {"out", c.out},
  };
}

}  // namespace pvsn
