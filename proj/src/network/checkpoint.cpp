#include "sparselab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <zlib.h>

#include "sparselab/error.hpp"

namespace sparselab {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'S', 'P', 'L', 'B'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  template <class T>
  void put(T v) {
    bytes(&v, sizeof v);
  }
  void reals(std::span<const double> v) { bytes(v.data(), v.size() * sizeof(double)); }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  void bytes(void* p, std::size_t n) {
    if (n > in_.size() - pos_) throw CheckpointError("checkpoint truncated");
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  template <class T>
  T get() {
    T v;
    bytes(&v, sizeof v);
    return v;
  }
  void reals(std::span<double> v) { bytes(v.data(), v.size() * sizeof(double)); }
  std::size_t pos() const { return pos_; }

 private:
  const std::string& in_;
  std::size_t pos_ = 0;
};

std::uint32_t crc(const char* p, std::size_t n) {
  uLong c = crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(crc32(c, reinterpret_cast<const Bytef*>(p), static_cast<uInt>(n)));
}

std::string padding_name(Padding p) { return p == Padding::Same ? "same" : "valid"; }

}  // namespace

std::string describe_spec(const NetworkSpec& spec) {
  std::string s = fmt::format("{}|{}", spec.name, fmt::join(spec.input, "x"));
  for (const LayerSpec& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::Linear:
        s += fmt::format("|linear:{}:{}:{}", l.out, to_string(l.activation), l.bias ? 1 : 0);
        break;
      case LayerKind::Conv2d:
        s += fmt::format("|conv2d:{}:{}:{}:{}:{}", l.out, l.kernel, padding_name(l.padding), to_string(l.activation),
                         l.bias ? 1 : 0);
        break;
      case LayerKind::MaxPool2: s += "|maxpool2"; break;
      case LayerKind::Flatten: s += "|flatten"; break;
    }
  }
  return s;
}

NetworkSpec parse_spec_description(const std::string& text) {
  auto split = [](const std::string& str, char sep) {
    std::vector<std::string> parts;
    std::stringstream ss(str);
    std::string item;
    while (std::getline(ss, item, sep)) parts.push_back(item);
    return parts;
  };
  auto activation = [](const std::string& a) {
    if (a == "none") return Activation::None;
    if (a == "relu") return Activation::Relu;
    if (a == "tanh") return Activation::Tanh;
    throw CheckpointError(fmt::format("unknown activation '{}' in spec", a));
  };
  auto number = [](const std::string& v) {
    try {
      return static_cast<std::size_t>(std::stoull(v));
    } catch (const std::exception&) {
      throw CheckpointError(fmt::format("bad number '{}' in spec", v));
    }
  };
  const auto fields = split(text, '|');
  if (fields.size() < 2) throw CheckpointError("malformed network description");
  NetworkSpec spec;
  spec.name = fields[0];
  for (const auto& d : split(fields[1], 'x')) spec.input.push_back(number(d));
  for (std::size_t i = 2; i < fields.size(); ++i) {
    const auto p = split(fields[i], ':');
    if (p[0] == "linear" && p.size() == 4) {
      spec.layers.push_back(LayerSpec::linear(number(p[1]), activation(p[2]), p[3] == "1"));
    } else if (p[0] == "conv2d" && p.size() == 6) {
      spec.layers.push_back(LayerSpec::conv(number(p[1]), number(p[2]), p[3] == "same" ? Padding::Same : Padding::Valid,
                                            activation(p[4]), p[5] == "1"));
    } else if (p[0] == "maxpool2") {
      spec.layers.push_back(LayerSpec::max_pool());
    } else if (p[0] == "flatten") {
      spec.layers.push_back(LayerSpec::flatten());
    } else {
      throw CheckpointError(fmt::format("unknown layer '{}' in spec", fields[i]));
    }
  }
  return spec;
}

std::string encode_checkpoint(const MaskedNetwork& net, const std::vector<double>& velocity) {
  Writer w;
  w.bytes(kMagic, 4);
  w.put<std::uint32_t>(kCheckpointVersion);
  const std::string desc = describe_spec(net.spec());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(desc.size()));
  w.bytes(desc.data(), desc.size());
  w.put<std::uint64_t>(net.step);
  const auto weighted = net.weighted_layers();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(weighted.size()));
  for (std::size_t li : weighted) {
    const Layer& l = net.layer(li);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(li));
    w.put<std::uint64_t>(l.weight.size());
    w.put<std::uint64_t>(l.bias.size());
    w.reals(l.weight.data());
    w.reals(l.bias.data());
    std::vector<std::uint8_t> packed((l.mask.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < l.mask.size(); ++i)
      if (l.mask.active(i)) packed[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    w.bytes(packed.data(), packed.size());
  }
  w.put<std::uint64_t>(velocity.size());
  w.reals(velocity);
  const std::uint32_t c = crc(w.str().data(), w.str().size());
  w.put<std::uint32_t>(c);
  return std::move(w.str());
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw CheckpointError("not a checkpoint file");
  if (bytes.size() < 12) throw CheckpointError("checkpoint truncated");
  std::uint32_t stored = 0;
  std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
  Reader r(bytes);
  char magic[4];
  r.bytes(magic, 4);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError(fmt::format("checkpoint version {} unsupported (expected {})", version, kCheckpointVersion));
  }
  if (crc(bytes.data(), bytes.size() - 4) != stored) throw CheckpointError("checkpoint checksum mismatch");

  const auto desc_len = r.get<std::uint32_t>();
  std::string desc(desc_len, '\0');
  r.bytes(desc.data(), desc_len);
  Checkpoint ck{MaskedNetwork::build(parse_spec_description(desc)), {}};
  ck.net.step = r.get<std::uint64_t>();
  const auto weighted = ck.net.weighted_layers();
  const auto n_layers = r.get<std::uint32_t>();
  if (n_layers != weighted.size()) throw CheckpointError("layer table does not match the stored architecture");
  for (std::size_t li : weighted) {
    Layer& l = ck.net.layer(li);
    if (r.get<std::uint32_t>() != li) throw CheckpointError("layer table out of order");
    const auto nw = r.get<std::uint64_t>();
    const auto nb = r.get<std::uint64_t>();
    if (nw != l.weight.size() || nb != l.bias.size()) {
      throw CheckpointError(fmt::format("layer {} stores {}+{} values, architecture needs {}+{}", li, nw, nb,
                                        l.weight.size(), l.bias.size()));
    }
    r.reals(l.weight.data());
    r.reals(l.bias.data());
    std::vector<std::uint8_t> packed((nw + 7) / 8);
    r.bytes(packed.data(), packed.size());
    std::vector<std::uint8_t> bits(nw);
    for (std::size_t i = 0; i < nw; ++i) bits[i] = (packed[i / 8] >> (i % 8)) & 1u;
    // Weights are stored already masked; set_mask would zero them again anyway.
    Tensor saved = l.weight;
    ck.net.set_mask(li, Mask(l.weight.shape(), std::move(bits)));
    if (!(saved == l.weight)) throw CheckpointError(fmt::format("layer {} has nonzero weights under its mask", li));
  }
  const auto nv = r.get<std::uint64_t>();
  if (nv != 0 && nv != ck.net.layout().total) throw CheckpointError("velocity length does not match the network");
  ck.velocity.resize(nv);
  r.reals(ck.velocity);
  if (r.pos() + 4 != bytes.size()) throw CheckpointError("trailing bytes in checkpoint");
  return ck;
}

void save_state(const MaskedNetwork& net, const std::filesystem::path& path, const std::vector<double>& velocity) {
  const std::string bytes = encode_checkpoint(net, velocity);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write checkpoint {}", path.string()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(fmt::format("failed writing checkpoint {}", path.string()));
}

Checkpoint load_state(const std::filesystem::path& path, const NetworkSpec* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(fmt::format("cannot open checkpoint {}", path.string()));
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Checkpoint ck = decode_checkpoint(bytes);
  if (expected && !(ck.net.spec() == *expected)) {
    throw CheckpointError(fmt::format("checkpoint architecture '{}' does not match expected '{}'",
                                      describe_spec(ck.net.spec()), describe_spec(*expected)));
  }
  return ck;
}

}  // namespace sparselab
