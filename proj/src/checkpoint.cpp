#include "prngrl/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

namespace prngrl {

namespace {

constexpr std::array<char, 8> kMagic{'P', 'R', 'N', 'G', 'R', 'L', 'C', 'K'};
constexpr std::uint64_t kMaxTensorElements = std::uint64_t{1} << 32;

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}

  template <typename U>
  void uint(U v) {
    unsigned char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    os_.write(reinterpret_cast<const char*>(buf), sizeof(U));
  }
  void real(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const char* p, std::size_t n) { os_.write(p, static_cast<std::streamsize>(n)); }

 private:
  std::ostream& os_;
};

class Reader {
 public:
  explicit Reader(std::istream& is) : is_(is) {}

  template <typename U>
  U uint() {
    unsigned char buf[sizeof(U)];
    read(reinterpret_cast<char*>(buf), sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
    return v;
  }
  double real() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  void read(char* p, std::size_t n) {
    if (!is_.read(p, static_cast<std::streamsize>(n))) throw CheckpointError("checkpoint: truncated file");
  }

 private:
  std::istream& is_;
};

void write_sizes(Writer& w, const std::vector<std::uint64_t>& sizes) {
  w.uint(static_cast<std::uint32_t>(sizes.size()));
  for (auto s : sizes) w.uint(s);
}

std::vector<std::uint64_t> read_sizes(Reader& r) {
  const auto k = r.uint<std::uint32_t>();
  if (k > 64) throw CheckpointError("checkpoint: implausible layer count");
  std::vector<std::uint64_t> sizes(k);
  for (auto& s : sizes) s = r.uint<std::uint64_t>();
  return sizes;
}

}  // namespace

std::string_view to_string(Formulation f) {
  switch (f) {
    case Formulation::bf: return "bf";
    case Formulation::bf_wanderer: return "bf_wanderer";
    case Formulation::rf: return "rf";
  }
  return "?";
}

Formulation formulation_from_string(std::string_view name) {
  for (auto f : {Formulation::bf, Formulation::bf_wanderer, Formulation::rf}) {
    if (to_string(f) == name) return f;
  }
  throw std::invalid_argument("unknown formulation '" + std::string(name) + "' (expected bf, bf_wanderer or rf)");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("checkpoint: cannot open " + path.string() + " for writing");
  Writer w(os);
  w.bytes(kMagic.data(), kMagic.size());
  w.uint(Checkpoint::kVersion);
  w.uint(static_cast<std::uint32_t>(ckpt.arch.formulation));
  w.uint(ckpt.arch.size);
  w.uint(ckpt.arch.horizon);
  w.uint(ckpt.epochs);
  write_sizes(w, ckpt.arch.lstm_hidden);
  write_sizes(w, ckpt.arch.dense_hidden);
  w.uint(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    w.uint(static_cast<std::uint32_t>(t.name.size()));
    w.bytes(t.name.data(), t.name.size());
    w.uint(static_cast<std::uint64_t>(t.value.rows()));
    w.uint(static_cast<std::uint64_t>(t.value.cols()));
    for (Eigen::Index i = 0; i < t.value.size(); ++i) w.real(t.value.data()[i]);
  }
  if (!os.flush()) throw CheckpointError("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("checkpoint: cannot open " + path.string());
  Reader r(is);
  std::array<char, 8> magic{};
  r.read(magic.data(), magic.size());
  if (magic != kMagic) throw CheckpointError("checkpoint: bad magic in " + path.string());
  const auto version = r.uint<std::uint32_t>();
  if (version != Checkpoint::kVersion) {
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto f = r.uint<std::uint32_t>();
  if (f > static_cast<std::uint32_t>(Formulation::rf)) throw CheckpointError("checkpoint: unknown formulation code");
  ckpt.arch.formulation = static_cast<Formulation>(f);
  ckpt.arch.size = r.uint<std::uint64_t>();
  ckpt.arch.horizon = r.uint<std::uint64_t>();
  ckpt.epochs = r.uint<std::uint64_t>();
  ckpt.arch.lstm_hidden = read_sizes(r);
  ckpt.arch.dense_hidden = read_sizes(r);
  const auto count = r.uint<std::uint32_t>();
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedTensor t;
    t.name.resize(r.uint<std::uint32_t>());
    r.read(t.name.data(), t.name.size());
    const auto rows = r.uint<std::uint64_t>();
    const auto cols = r.uint<std::uint64_t>();
    if (rows * cols > kMaxTensorElements) throw CheckpointError("checkpoint: implausible tensor shape for " + t.name);
    t.value.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = r.real();
    ckpt.tensors.push_back(std::move(t));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw CheckpointError("checkpoint: trailing bytes");
  return ckpt;
}

std::vector<NamedTensor> capture(const std::vector<nn::ParamRef<double>>& params) {
  std::vector<NamedTensor> out;
  out.reserve(params.size());
  for (const auto& p : params) {
    nn::Matrix<double> m(p.rows, p.cols);
    std::memcpy(m.data(), p.value, sizeof(double) * static_cast<std::size_t>(p.size()));
    out.push_back({p.name, std::move(m)});
  }
  return out;
}

void restore(const std::vector<nn::ParamRef<double>>& params, const std::vector<NamedTensor>& tensors) {
  if (params.size() != tensors.size()) {
    throw CheckpointError("checkpoint: expected " + std::to_string(params.size()) + " tensors, found " +
                          std::to_string(tensors.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = params[k];
    const auto& t = tensors[k];
    if (p.name != t.name || p.rows != t.value.rows() || p.cols != t.value.cols()) {
      throw CheckpointError("checkpoint: tensor " + t.name + " does not match parameter " + p.name);
    }
    std::memcpy(p.value, t.value.data(), sizeof(double) * static_cast<std::size_t>(p.size()));
  }
}

}  // namespace prngrl
