#include "dppo/nd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>

namespace dppo::nd {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

void to_le(std::span<const double> src, std::vector<char>& out) {
  const std::size_t base = out.size();
  out.resize(base + src.size() * 8);
  for (std::size_t i = 0; i < src.size(); ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(src[i]);
    for (int b = 0; b < 8; ++b) out[base + i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
  }
}

double from_le(const char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[b])) << (8 * b);
  return std::bit_cast<double>(bits);
}

std::filesystem::path with_ext(const std::filesystem::path& stem, const char* ext) {
  return std::filesystem::path(stem.string() + ext);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& stem, std::span<const NamedTensor> tensors,
                     const nlohmann::json& config, std::uint64_t seed) {
  nlohmann::json manifest;
  manifest["format"] = "dppo-ckpt-1";
  manifest["seed"] = seed;
  manifest["config"] = config;
  manifest["blob"] = with_ext(stem, ".bin").filename().string();
  nlohmann::json entries = nlohmann::json::array();
  std::vector<char> blob;
  std::set<std::string> seen;
  for (const NamedTensor& nt : tensors) {
    if (!seen.insert(nt.name).second) throw std::invalid_argument("save_checkpoint: duplicate tensor " + nt.name);
    nt.tensor->require_finite("checkpoint tensor " + nt.name);
    entries.push_back({{"name", nt.name}, {"shape", nt.tensor->shape()}, {"dtype", "f64"}, {"offset", blob.size()}});
    to_le(nt.tensor->data(), blob);
  }
  manifest["tensors"] = entries;
  manifest["bytes"] = blob.size();
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  std::ofstream bin(with_ext(stem, ".bin"), std::ios::binary | std::ios::trunc);
  bin.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!bin) throw std::runtime_error("save_checkpoint: failed writing " + with_ext(stem, ".bin").string());
  std::ofstream js(with_ext(stem, ".json"), std::ios::trunc);
  js << manifest.dump(2) << '\n';
  if (!js) throw std::runtime_error("save_checkpoint: failed writing " + with_ext(stem, ".json").string());
}

Checkpoint load_checkpoint(const std::filesystem::path& stem) {
  const auto json_path = with_ext(stem, ".json");
  std::ifstream js(json_path);
  if (!js) throw std::runtime_error("load_checkpoint: cannot open " + json_path.string());
  const nlohmann::json manifest = nlohmann::json::parse(js);
  if (manifest.value("format", "") != "dppo-ckpt-1") throw std::runtime_error("load_checkpoint: unknown format");

  const auto bin_path = with_ext(stem, ".bin");
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("load_checkpoint: cannot open " + bin_path.string());
  std::vector<char> blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  if (blob.size() != manifest.at("bytes").get<std::size_t>()) {
    throw std::runtime_error("load_checkpoint: blob size does not match manifest");
  }

  Checkpoint ckpt;
  ckpt.config = manifest.at("config");
  ckpt.seed = manifest.at("seed").get<std::uint64_t>();
  for (const auto& e : manifest.at("tensors")) {
    if (e.at("dtype") != "f64") throw std::runtime_error("load_checkpoint: unsupported dtype");
    const Shape shape = e.at("shape").get<Shape>();
    const std::size_t offset = e.at("offset").get<std::size_t>();
    const std::size_t n = shape_size(shape);
    if (offset + n * 8 > blob.size()) throw std::runtime_error("load_checkpoint: tensor extends past blob");
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = from_le(blob.data() + offset + i * 8);
    ckpt.tensors.emplace(e.at("name").get<std::string>(), Tensor(shape, std::move(data)));
  }
  return ckpt;
}

void restore_tensors(const Checkpoint& ckpt, std::span<const NamedTensor> into, bool strict) {
  for (const NamedTensor& nt : into) {
    auto it = ckpt.tensors.find(nt.name);
    if (it == ckpt.tensors.end()) throw std::runtime_error("restore_tensors: checkpoint lacks " + nt.name);
    if (it->second.shape() != nt.tensor->shape()) {
      throw ShapeError("restore_tensors: " + nt.name + " has shape " + shape_string(it->second.shape()) +
                       ", expected " + shape_string(nt.tensor->shape()));
    }
    nt.tensor->storage() = it->second.storage();
  }
  if (strict && ckpt.tensors.size() != into.size()) {
    throw std::runtime_error("restore_tensors: checkpoint has tensors that were not restored");
  }
}

}  // namespace dppo::nd
