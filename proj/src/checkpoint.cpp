#include "hibehrt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace hibehrt {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

namespace {

template <typename U>
void write_pod(std::ofstream& out, U v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename U>
U read_pod(std::ifstream& in) {
  U v;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw TruncatedFile("checkpoint: unexpected end of file");
  return v;
}

std::string read_bytes(std::ifstream& in, std::size_t n) {
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw TruncatedFile("checkpoint: unexpected end of file");
  return s;
}

}  // namespace

std::string canonical_config_text(const std::map<std::string, std::string>& config) {
  std::string text;
  for (const auto& [k, v] : config) {
    text += k;
    text += '=';
    text += v;
    text += '\n';
  }
  return text;
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> config;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    ++line_no;
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "config line missing '='");
    config[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return config;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileNotFound(path);
  out.write(kCheckpointMagic, 8);
  write_pod<std::uint32_t>(out, kCheckpointVersion);
  const std::string cfg = canonical_config_text(ckpt.config);
  write_pod<std::uint64_t>(out, cfg.size());
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  write_pod<std::uint64_t>(out, ckpt.params.size());
  for (const auto& [name, p] : ckpt.params) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.shape.size()));
    for (std::size_t d : p.value.shape) write_pod<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(p.value.data.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(float)));
  }
  if (!out) throw DataError("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotFound(path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) throw BadMagic();
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw VersionMismatch("checkpoint: version " + std::to_string(version) + ", expected " +
                          std::to_string(kCheckpointVersion));
  Checkpoint ckpt;
  const auto cfg_len = read_pod<std::uint64_t>(in);
  ckpt.config = parse_config_text(read_bytes(in, cfg_len));
  const auto n_tensors = read_pod<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < n_tensors; ++i) {
    const auto name_len = read_pod<std::uint32_t>(in);
    const std::string name = read_bytes(in, name_len);
    const auto rank = read_pod<std::uint32_t>(in);
    std::vector<std::size_t> shape(rank);
    std::size_t count = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(read_pod<std::uint64_t>(in));
      count *= d;
    }
    Tensor<float> t = Tensor<float>::zeros(shape);
    in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(count * sizeof(float)));
    if (!in) throw TruncatedFile("checkpoint: tensor data truncated at " + name);
    ckpt.params.add(name, std::move(t));
  }
  // Trailing bytes mean the header undercounted (or the file was spliced).
  in.peek();
  if (!in.eof()) throw TruncatedFile("checkpoint: trailing bytes after declared tensor count");
  return ckpt;
}

void load_params_into(const Checkpoint& ckpt, ParameterStore<float>& store) {
  if (ckpt.params.size() != store.size())
    throw ConfigMismatch("checkpoint: tensor count " + std::to_string(ckpt.params.size()) +
                         " != model parameter count " + std::to_string(store.size()));
  for (const auto& [name, p] : ckpt.params) {
    Parameter<float>& dst = store.get(name);
    if (dst.value.shape != p.value.shape) throw ShapeMismatch("checkpoint: shape mismatch for " + name);
    dst.value.data = p.value.data;
  }
}

}  // namespace hibehrt
