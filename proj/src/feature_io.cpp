#include "tsm/feature_io.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace tsm {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little,
              "feature file writer assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'V', 'M', 'A', 'P'};
constexpr std::uint8_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  const std::size_t n = out.size();
  out.resize(n + 4);
  std::memcpy(out.data() + n, &v, 4);
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
  const std::size_t n = out.size();
  out.resize(n + 4);
  std::memcpy(out.data() + n, &v, 4);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  const std::streamsize size = in.tellg();
  in.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  in.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!in) throw Error(ErrorKind::Io, "failed reading '" + path + "'");
  return bytes;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path + "'");
}

void write_mask_file(const FeatureSequence& seq, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
  for (int t = 0; t < seq.frames; ++t) {
    if (t > 0) out << ' ';
    out << static_cast<int>(seq.relevance[static_cast<std::size_t>(t)]);
  }
  out << '\n';
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + path + "'");
}

std::vector<std::uint8_t> read_mask_file(const std::string& path, int frames) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  std::vector<std::uint8_t> mask;
  mask.reserve(static_cast<std::size_t>(frames));
  int flag = 0;
  while (in >> flag) mask.push_back(flag != 0 ? 1 : 0);
  if (static_cast<int>(mask.size()) != frames) {
    throw Error(ErrorKind::Format, "mask '" + path + "' does not have one flag per frame");
  }
  return mask;
}

}  // namespace

std::vector<std::uint8_t> serialize_sequence(const FeatureSequence& seq) {
  if (seq.frames < 1 || seq.feature_dim < 1 ||
      seq.values.size() != static_cast<std::size_t>(seq.frames) * seq.feature_dim) {
    throw Error(ErrorKind::Dimension, "sequence payload does not match its header");
  }
  if (seq.label < 0) throw Error(ErrorKind::Argument, "labels must be non-negative");
  std::vector<std::uint8_t> out;
  out.reserve(13 + seq.values.size() * 4);
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(kVersion);
  put_u32(out, static_cast<std::uint32_t>(seq.frames));
  put_u32(out, static_cast<std::uint32_t>(seq.feature_dim));
  put_u32(out, static_cast<std::uint32_t>(seq.label));
  for (double v : seq.values) put_f32(out, static_cast<float>(v));
  return out;
}

FeatureSequence parse_sequence(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorKind::Format, "not a feature file (bad magic at offset 0)");
  }
  if (bytes.size() < 5) throw Error(ErrorKind::Format, "feature file truncated at offset 4");
  if (bytes[4] != kVersion) {
    throw Error(ErrorKind::Format,
                "unsupported feature file version " + std::to_string(bytes[4]));
  }
  if (bytes.size() < 17) {
    throw Error(ErrorKind::Format,
                "feature file header truncated at offset " + std::to_string(bytes.size()));
  }
  std::uint32_t t = 0, l = 0, label = 0;
  std::memcpy(&t, bytes.data() + 5, 4);
  std::memcpy(&l, bytes.data() + 9, 4);
  std::memcpy(&label, bytes.data() + 13, 4);
  if (t < 1 || l < 1) {
    throw Error(ErrorKind::Format, "feature file declares an empty sequence");
  }
  const std::size_t payload = static_cast<std::size_t>(t) * l;
  const std::size_t expected = 17 + payload * 4;
  if (bytes.size() < expected) {
    throw Error(ErrorKind::Format,
                "feature file payload truncated at offset " + std::to_string(bytes.size()) +
                    " (expected " + std::to_string(expected) + " bytes)");
  }
  if (bytes.size() > expected) {
    throw Error(ErrorKind::Format,
                "trailing bytes after feature payload at offset " + std::to_string(expected));
  }
  FeatureSequence seq;
  seq.frames = static_cast<int>(t);
  seq.feature_dim = static_cast<int>(l);
  seq.label = static_cast<int>(label);
  seq.values.resize(payload);
  for (std::size_t i = 0; i < payload; ++i) {
    float f = 0.0f;
    std::memcpy(&f, bytes.data() + 17 + i * 4, 4);
    seq.values[i] = static_cast<double>(f);
  }
  return seq;
}

void write_sequence_file(const FeatureSequence& seq, const std::string& path) {
  write_file(path, serialize_sequence(seq));
  if (!seq.relevance.empty()) {
    if (seq.relevance.size() != static_cast<std::size_t>(seq.frames)) {
      throw Error(ErrorKind::Dimension, "relevance mask must have one flag per frame");
    }
    write_mask_file(seq, path + ".mask");
  }
}

FeatureSequence read_sequence_file(const std::string& path) {
  FeatureSequence seq = parse_sequence(read_file(path));
  seq.id = fs::path(path).stem().string();
  const std::string mask_path = path + ".mask";
  if (fs::exists(mask_path)) seq.relevance = read_mask_file(mask_path, seq.frames);
  return seq;
}

void write_dataset_dir(const TaskData& data, const std::string& dir, bool force) {
  const fs::path root(dir);
  const fs::path manifest = root / "manifest.txt";
  if (fs::exists(manifest) && !force) {
    throw Error(ErrorKind::State,
                "'" + dir + "' already holds a dataset; pass force to overwrite");
  }
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create '" + dir + "': " + ec.message());

  std::ostringstream lines;
  const auto emit = [&](const std::vector<FeatureSequence>& split, const char* tag) {
    for (const FeatureSequence& seq : split) {
      if (seq.id.empty()) throw Error(ErrorKind::Argument, "sequence id must not be empty");
      const std::string file = seq.id + ".vmap";
      write_sequence_file(seq, (root / file).string());
      lines << file << ' ' << tag << '\n';
    }
  };
  emit(data.train, "train");
  emit(data.test, "test");

  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open '" + manifest.string() + "' for writing");
  out << lines.str();
  if (!out) throw Error(ErrorKind::Io, "failed writing '" + manifest.string() + "'");
}

std::vector<FeatureSequence> read_dataset_dir(const std::string& dir,
                                              const std::string& split) {
  const fs::path root(dir);
  const fs::path manifest = root / "manifest.txt";
  std::ifstream in(manifest);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + manifest.string() + "'");

  std::vector<FeatureSequence> out;
  std::string line;
  int line_no = 0;
  int feature_dim = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string file, tag;
    if (!(row >> file >> tag) || (tag != "train" && tag != "test")) {
      throw Error(ErrorKind::Format, "bad manifest line " + std::to_string(line_no) +
                                         " in '" + manifest.string() + "'");
    }
    if (!split.empty() && tag != split) continue;
    FeatureSequence seq = read_sequence_file((root / file).string());
    if (feature_dim < 0) {
      feature_dim = seq.feature_dim;
    } else if (seq.feature_dim != feature_dim) {
      throw Error(ErrorKind::Format, "'" + file + "' disagrees on feature_dim (" +
                                         std::to_string(seq.feature_dim) + " vs " +
                                         std::to_string(feature_dim) + ")");
    }
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace tsm
