#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "eyetrans/trainer.hpp"
#include "json.hpp"

namespace eyetrans {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<float> data;

  bool operator==(const NamedTensor&) const = default;
};

// Layout, all integers little-endian:
//   "EYTR" u32 version u64 config_hash u64 seed u32 epoch
//   u32 metadata_len metadata(JSON text)
//   u32 tensor_count { u32 name_len name u32 rank u64 dims[rank] f32 data[] }
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::uint32_t epoch = 0;
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(std::string_view name) const;
};

std::string serialize_checkpoint(const Checkpoint& c);
// Throws FormatError on bad magic, version, or truncation.
Checkpoint parse_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Model parameters, then Adam moments under adam.m/ and adam.v/.
// `metadata` gains task, model config and adam_step.
Checkpoint make_checkpoint(TaskModel& model, const TrainState& state, std::uint64_t seed, nlohmann::json metadata);

// Copies tensors into an existing model; names and shapes must match.
void restore_checkpoint(const Checkpoint& c, TaskModel& model, TrainState& state);

struct LoadedModel {
  std::unique_ptr<TaskModel> model;
  TrainState state;
  Checkpoint checkpoint;
};
LoadedModel load_model(const std::filesystem::path& path);

}  // namespace eyetrans
