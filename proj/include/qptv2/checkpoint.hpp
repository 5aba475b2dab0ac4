#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "qptv2/autodiff.hpp"
#include "qptv2/model.hpp"

namespace qptv2 {

struct NamedTensor {
  std::string name;
  nn::Matrix<double> value;
};

// Binary archive: magic, count, then per tensor (name length, name, rows,
// cols, row-major float64 values), little-endian.
void write_tensor_archive(const std::filesystem::path& path, const nn::ParameterStore<double>& store);
std::vector<NamedTensor> read_tensor_archive(const std::filesystem::path& path);

// Copies archived values into same-named parameters. Every parameter in the
// store must be present with a matching shape; extra archive entries are an
// error unless `allow_extra`.
void assign_tensors(nn::ParameterStore<double>& store, const std::vector<NamedTensor>& tensors,
                    bool allow_extra = false);

struct Checkpoint {
  nlohmann::json manifest;  // kind, step, seed, model config, extras
  std::vector<NamedTensor> tensors;
};

// A checkpoint is a directory holding manifest.json and params.bin.
void save_checkpoint(const std::filesystem::path& dir, const nlohmann::json& manifest,
                     const nn::ParameterStore<double>& store);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

void save_autoencoder(const std::filesystem::path& dir, const Autoencoder<double>& model, long step);
Autoencoder<double> load_autoencoder(const std::filesystem::path& dir);
Autoencoder<double> autoencoder_from_checkpoint(const Checkpoint& ckpt);

}  // namespace qptv2
