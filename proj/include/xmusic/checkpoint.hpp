/**
 * @file checkpoint.hpp
 * @brief Model checkpoint container.
 *
 * Layout: the magic bytes "XMCK", a little-endian u32 format version, a u32
 * header length, a JSON header of that many bytes, then every tensor as raw
 * little-endian float64 values. The header lists, per model, its role
 * ("generator" or "selector"), its config, its vocabulary, and each tensor's
 * name, shape and byte offset into the data section. One file may hold both
 * models.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "xmusic/generator.hpp"
#include "xmusic/selector.hpp"

namespace xmusic::checkpoint {

inline constexpr std::uint32_t kVersion = 1;
inline constexpr char kMagic[4] = {'X', 'M', 'C', 'K'};

struct Tensor {
  std::string name;
  nn::Matrix value;
};

struct ModelEntry {
  std::string role;
  nlohmann::json config;
  VocabSpec vocab;
  std::vector<Tensor> tensors;
};

ModelEntry entry_of(const Generator& gen);
ModelEntry entry_of(const Selector& sel);

/// Throws IOError when the file cannot be written.
void save(const std::string& path, const std::vector<ModelEntry>& models);
/// Throws IOError when unreadable and InvalidCheckpoint when malformed.
std::vector<ModelEntry> load(const std::string& path);

/// Builds the model of the given role; throws InvalidCheckpoint when absent
/// or inconsistent with its config.
Generator generator_from(const std::vector<ModelEntry>& models);
Selector selector_from(const std::vector<ModelEntry>& models);
bool has_role(const std::vector<ModelEntry>& models, const std::string& role);

}  // namespace xmusic::checkpoint
