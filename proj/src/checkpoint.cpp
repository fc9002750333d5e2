#include "pvsn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

namespace pvsn {

namespace {

using Kind = CheckpointError::Kind;

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  template <typename U>
  U le() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError(Kind::Truncated, "truncated checkpoint");
  }

  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const SiameseParams<float>& params, const std::filesystem::path& path) {
  const auto entries = params.state();
  std::string out = "PVSN";
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, t] : entries) {
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    out.push_back(0);
    out.push_back(static_cast<char>(t.rank()));
    for (auto e : t.shape()) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e));
    for (float v : t.values()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError(Kind::Io, "cannot open checkpoint for writing: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw CheckpointError(Kind::Io, "failed writing checkpoint: " + path.string());
}

SiameseParams<float> load_checkpoint(const std::filesystem::path& path, const Architecture& arch) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError(Kind::Io, "cannot open checkpoint: " + path.string());
  Reader in(std::string(std::istreambuf_iterator<char>(f), {}));

  std::string magic;
  try {
    magic = in.take(4);
  } catch (const CheckpointError&) {
    throw CheckpointError(Kind::BadMagic, "bad magic");
  }
  if (magic != "PVSN") throw CheckpointError(Kind::BadMagic, "bad magic");
  const auto version = in.le<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::UnsupportedVersion, "unsupported version " + std::to_string(version));
  }
  const auto count = in.le<std::uint32_t>();
  std::map<std::string, Tensor<float>> stored;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name = in.take(in.le<std::uint16_t>());
    const auto dtype = in.le<std::uint8_t>();
    if (dtype != 0) {
      throw CheckpointError(Kind::UnsupportedDtype,
                            "unsupported dtype " + std::to_string(dtype) + " for " + name);
    }
    const auto rank = in.le<std::uint8_t>();
    Shape shape(rank);
    std::size_t count_values = 1;
    for (auto& e : shape) {
      e = in.le<std::uint32_t>();
      if (e == 0) throw CheckpointError(Kind::ShapeMismatch, "zero extent in " + name);
      // Checked before allocating so a corrupt header cannot request gigabytes.
      if (e > in.remaining() / 4 / count_values) throw CheckpointError(Kind::Truncated, "truncated checkpoint");
      count_values *= e;
    }
    std::vector<float> values(count_values);
    for (auto& v : values) v = std::bit_cast<float>(in.le<std::uint32_t>());
    stored.insert_or_assign(name, Tensor<float>(std::move(shape), std::move(values)));
  }

  // A freshly shaped template tells us what each entry must look like.
  SiameseParams<float> p = init_params<float>(0, arch);
  auto fetch = [&](const std::string& name, const Shape& expected) -> Tensor<float> {
    auto it = stored.find(name);
    if (it == stored.end()) throw CheckpointError(Kind::MissingParameter, "missing parameter " + name);
    if (it->second.shape() != expected) {
      throw CheckpointError(Kind::ShapeMismatch, "shape mismatch for " + name + ": expected " +
                                                     shape_str(expected) + ", got " +
                                                     shape_str(it->second.shape()));
    }
    return it->second;
  };
  auto assign = [&](Tensor<float>& dst, const std::string& name) {
    Tensor<float> src = fetch(name, dst.shape());
    std::copy(src.values().begin(), src.values().end(), dst.values().begin());
  };
  for (std::size_t b = 0; b < 4; ++b) {
    const std::string idx = std::to_string(b + 1);
    assign(p.conv_weight[b], "conv" + idx + ".weight");
    assign(p.conv_bias[b], "conv" + idx + ".bias");
    assign(p.bn_gamma[b], "bn" + idx + ".gamma");
    assign(p.bn_beta[b], "bn" + idx + ".beta");
    const Shape c{arch.channels};
    auto rm = fetch("bn" + idx + ".running_mean", c);
    auto rv = fetch("bn" + idx + ".running_var", c);
    p.bn_state[b].running_mean.assign(rm.values().begin(), rm.values().end());
    p.bn_state[b].running_var.assign(rv.values().begin(), rv.values().end());
  }
  assign(p.fc5_weight, "fc5.weight");
  assign(p.fc5_bias, "fc5.bias");
  assign(p.fc6_weight, "fc6.weight");
  assign(p.fc6_bias, "fc6.bias");
  assign(p.theta0, "head.theta0");
  assign(p.theta1, "head.theta1");
  p.margin = fetch("loss.margin", Shape{1}).item();
  return p;
}

}  // namespace pvsn
