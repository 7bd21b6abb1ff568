#include "stencilml/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "stencilml/error.hpp"

namespace stencilml {

using nlohmann::json;

namespace {

constexpr const char* kFormatName = "stencilml-checkpoint";

template <class UInt>
void put_le(std::ostream& out, UInt v) {
  unsigned char bytes[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), sizeof bytes);
}

template <class UInt>
UInt get_le(std::istream& in, const std::string& source) {
  unsigned char bytes[sizeof(UInt)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof bytes)) throw ParseError(source, 0, "truncated checkpoint");
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

json to_json(const ModelConfig& c) {
  return json{{"point_widths", c.point_widths}, {"dense_widths", c.dense_widths}, {"num_classes", c.num_classes},
              {"dropout", c.dropout},           {"input_size", c.input_size},     {"bn_momentum", c.bn_momentum},
              {"bn_epsilon", c.bn_epsilon}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.point_widths = j.at("point_widths").get<std::vector<int>>();
  c.dense_widths = j.at("dense_widths").get<std::vector<int>>();
  c.num_classes = j.at("num_classes").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.input_size = j.at("input_size").get<int>();
  c.bn_momentum = j.at("bn_momentum").get<double>();
  c.bn_epsilon = j.at("bn_epsilon").get<double>();
  c.validate();
  return c;
}

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  json manifest = ckpt.manifest;
  manifest["format"] = kFormatName;
  manifest["version"] = kCheckpointFormatVersion;
  manifest["model"] = to_json(ckpt.params.config);
  out << manifest.dump() << '\n';
  for (const auto& t : ckpt.params.tensors()) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) put_le<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    for (double v : t.values) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Data, "cannot open '" + path + "' for writing");
  save_checkpoint(out, ckpt);
  if (!out) throw Error(ErrorKind::Data, "failed writing '" + path + "'");
}

Checkpoint load_checkpoint(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, 1, "empty checkpoint");
  Checkpoint ckpt;
  try {
    ckpt.manifest = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(source, 1, std::string("bad manifest: ") + e.what());
  }
  if (ckpt.manifest.value("format", std::string()) != kFormatName) {
    throw ParseError(source, 1, "not a stencil classifier checkpoint");
  }
  const int version = ckpt.manifest.value("version", -1);
  if (version != kCheckpointFormatVersion) {
    throw ParseError(source, 1, "unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig config;
  try {
    config = model_config_from_json(ckpt.manifest.at("model"));
  } catch (const std::exception& e) {
    throw ParseError(source, 1, std::string("bad model configuration: ") + e.what());
  }
  ckpt.params = zeros_like(init_model<double>(config, 0));

  for (auto& t : ckpt.params.tensors()) {
    const auto name_len = get_le<std::uint32_t>(in, source);
    if (name_len > 256) throw ParseError(source, 0, "corrupt tensor header");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw ParseError(source, 0, "truncated checkpoint");
    if (name != t.name) throw ParseError(source, 0, "expected tensor '" + t.name + "', found '" + name + "'");
    const auto rank = get_le<std::uint32_t>(in, source);
    if (rank != t.shape.size()) throw ParseError(source, 0, "shape mismatch for " + t.name);
    for (int d : t.shape) {
      if (get_le<std::uint64_t>(in, source) != static_cast<std::uint64_t>(d)) {
        throw ParseError(source, 0, "shape mismatch for " + t.name);
      }
    }
    for (double& v : t.values) v = std::bit_cast<double>(get_le<std::uint64_t>(in, source));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError(source, 0, "trailing bytes after the last tensor");
  return ckpt;
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Data, "cannot open checkpoint '" + path + "'");
  return load_checkpoint(in, path);
}

}  // namespace stencilml
