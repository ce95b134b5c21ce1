#include "tsm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace tsm {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'T', 'S', 'M', 'C'};
constexpr std::uint8_t kVersion = 1;

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  const std::size_t n = out.size();
  out.resize(n + 4);
  std::memcpy(out.data() + n, &v, 4);
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  const std::size_t n = out.size();
  out.resize(n + 8);
  std::memcpy(out.data() + n, &v, 8);
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const std::size_t n = out.size();
  out.resize(n + 8);
  std::memcpy(out.data() + n, &v, 8);
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return take<std::uint8_t>(); }
  std::uint32_t u32() { return take<std::uint32_t>(); }
  std::uint64_t u64() { return take<std::uint64_t>(); }
  double f64() { return take<double>(); }

  void raw(void* dst, std::size_t n) {
    require(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  std::size_t offset() const { return pos_; }
  bool exhausted() const { return pos_ == bytes_.size(); }

 private:
  template <typename T>
  T take() {
    T v;
    raw(&v, sizeof(T));
    return v;
  }

  void require(std::size_t n) {
    if (pos_ + n > bytes_.size()) {
      throw Error(ErrorKind::Format,
                  "checkpoint truncated at byte offset " + std::to_string(pos_));
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::uint8_t attention_mask(const AttentionLevels& levels) {
  return static_cast<std::uint8_t>((levels.a0 ? 1 : 0) | (levels.a1 ? 2 : 0) |
                                   (levels.a2 ? 4 : 0));
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const HeadModel& model) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u8(out, kVersion);

  const ModelConfig& cfg = model.config;
  put_u32(out, static_cast<std::uint32_t>(cfg.t_fixed));
  put_u32(out, static_cast<std::uint32_t>(cfg.feature_dim));
  put_u32(out, static_cast<std::uint32_t>(cfg.classes));
  put_u8(out, 3);
  for (int w : cfg.widths) put_u32(out, static_cast<std::uint32_t>(w));
  put_u8(out, 2);
  for (int w : cfg.attention_widths) put_u32(out, static_cast<std::uint32_t>(w));
  put_u8(out, attention_mask(cfg.attention));
  put_u64(out, cfg.seed);
  put_u64(out, model.iteration);

  const auto params = model.named_parameters();
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, tensor] : params) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u8(out, static_cast<std::uint8_t>(tensor->rank()));
    for (int d : tensor->shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : tensor->values()) put_f64(out, v);
  }
  return out;
}

HeadModel parse_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(ErrorKind::Format, "not a model checkpoint (bad magic at offset 0)");
  }
  const std::uint8_t version = r.u8();
  if (version != kVersion) {
    throw Error(ErrorKind::Format,
                "unsupported checkpoint version " + std::to_string(version));
  }

  ModelConfig cfg;
  cfg.t_fixed = static_cast<int>(r.u32());
  cfg.feature_dim = static_cast<int>(r.u32());
  cfg.classes = static_cast<int>(r.u32());
  if (r.u8() != 3) throw Error(ErrorKind::Format, "checkpoint expects three block widths");
  for (int& w : cfg.widths) w = static_cast<int>(r.u32());
  if (r.u8() != 2) throw Error(ErrorKind::Format, "checkpoint expects two attention widths");
  for (int& w : cfg.attention_widths) w = static_cast<int>(r.u32());
  const std::uint8_t mask = r.u8();
  cfg.attention = {(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0};
  cfg.seed = r.u64();
  const std::uint64_t iteration = r.u64();

  validate_model_config(cfg);

  HeadModel model;
  model.config = cfg;
  model.iteration = iteration;
  auto params = model.named_parameters();
  const std::vector<std::vector<int>> expected_shapes = parameter_shapes(cfg);
  const std::uint32_t count = r.u32();
  if (count != params.size()) {
    throw Error(ErrorKind::Format, "checkpoint parameter count mismatch");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& [expected_name, slot] = params[p];
    const std::uint32_t name_len = r.u32();
    std::string name(name_len, '\0');
    r.raw(name.data(), name_len);
    if (name != expected_name) {
      throw Error(ErrorKind::Format, "unexpected parameter '" + name + "' at byte offset " +
                                         std::to_string(r.offset()));
    }
    const int rank = static_cast<int>(r.u8());
    std::vector<int> shape(static_cast<std::size_t>(rank));
    for (int& d : shape) d = static_cast<int>(r.u32());
    if (shape != expected_shapes[p]) {
      throw Error(ErrorKind::Format, "parameter '" + name + "' has a shape inconsistent with " +
                                         "the checkpoint config");
    }
    const int n = shape_size(shape);
    std::vector<double> data(static_cast<std::size_t>(n));
    for (double& v : data) v = r.f64();
    *slot = Tensor::from_data(std::move(shape), std::move(data), /*requires_grad=*/true);
  }
  if (!r.exhausted()) {
    throw Error(ErrorKind::Format, "trailing bytes after checkpoint payload at offset " +
                                       std::to_string(r.offset()));
  }
  return model;
}

void save_checkpoint(const HeadModel& model, const std::string& path) {
  const std::vector<std::uint8_t> bytes = serialize_checkpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Io, "failed writing checkpoint to '" + path + "'");
}

HeadModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  const std::streamsize size = in.tellg();
  in.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  in.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!in) throw Error(ErrorKind::Io, "failed reading '" + path + "'");
  return parse_checkpoint(bytes);
}

}  // namespace tsm
