#include "qptv2/checkpoint.hpp"

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "qptv2/error.hpp"

namespace qptv2 {

namespace {

constexpr std::array<char, 8> kMagic{'Q', 'P', 'T', 'V', '2', 'T', 'N', 'S'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IoError("truncated tensor archive " + path.string());
  return v;
}

}  // namespace

void write_tensor_archive(const std::filesystem::path& path, const nn::ParameterStore<double>& store) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os.write(kMagic.data(), kMagic.size());
  put<std::uint64_t>(os, store.size());
  for (const auto& p : store) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(p.value.rows()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(p.value.cols()));
    for (Eigen::Index r = 0; r < p.value.rows(); ++r)
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) put<double>(os, p.value(r, c));
  }
  if (!os) throw IoError("failed writing " + path.string());
}

std::vector<NamedTensor> read_tensor_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw IoError("not a tensor archive: " + path.string());
  const auto count = get<std::uint64_t>(is, path);
  std::vector<NamedTensor> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(is, path);
    NamedTensor t;
    t.name.resize(len);
    if (!is.read(t.name.data(), len)) throw IoError("truncated tensor archive " + path.string());
    const auto rows = get<std::uint64_t>(is, path);
    const auto cols = get<std::uint64_t>(is, path);
    t.value.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < t.value.rows(); ++r)
      for (Eigen::Index c = 0; c < t.value.cols(); ++c) t.value(r, c) = get<double>(is, path);
    out.push_back(std::move(t));
  }
  return out;
}

void assign_tensors(nn::ParameterStore<double>& store, const std::vector<NamedTensor>& tensors, bool allow_extra) {
  std::map<std::string, const NamedTensor*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t;
  std::size_t used = 0;
  for (auto& p : store) {
    const auto it = by_name.find(p.name);
    if (it == by_name.end()) throw DataError("checkpoint is missing parameter " + p.name);
    const auto& v = it->second->value;
    if (v.rows() != p.value.rows() || v.cols() != p.value.cols()) {
      throw DataError("checkpoint shape mismatch for " + p.name);
    }
    p.value = v;
    ++used;
  }
  if (!allow_extra && used != tensors.size()) throw DataError("checkpoint has parameters the model does not");
}

void save_checkpoint(const std::filesystem::path& dir, const nlohmann::json& manifest,
                     const nn::ParameterStore<double>& store) {
  std::filesystem::create_directories(dir);
  std::ofstream os(dir / "manifest.json");
  if (!os) throw IoError("cannot write " + (dir / "manifest.json").string());
  os << manifest.dump(2) << "\n";
  write_tensor_archive(dir / "params.bin", store);
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw IoError("no checkpoint manifest in " + dir.string());
  Checkpoint ckpt;
  try {
    ckpt.manifest = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& ex) {
    throw IoError("malformed checkpoint manifest: " + std::string(ex.what()));
  }
  ckpt.tensors = read_tensor_archive(dir / "params.bin");
  return ckpt;
}

void save_autoencoder(const std::filesystem::path& dir, const Autoencoder<double>& model, long step) {
  nlohmann::json m;
  m["kind"] = "autoencoder";
  m["step"] = step;
  m["seed"] = model.config().seed;
  m["model"] = to_json(model.config());
  m["checksum"] = model.params().checksum();
  save_checkpoint(dir, m, model.params());
}

Autoencoder<double> autoencoder_from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.manifest.contains("model")) throw DataError("checkpoint manifest lacks a model config");
  Autoencoder<double> model(autoencoder_config_from_json(ckpt.manifest["model"]));
  assign_tensors(model.params(), ckpt.tensors, true);
  return model;
}

Autoencoder<double> load_autoencoder(const std::filesystem::path& dir) {
  return autoencoder_from_checkpoint(load_checkpoint(dir));
}

}  // namespace qptv2
