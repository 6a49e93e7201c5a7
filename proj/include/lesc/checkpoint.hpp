#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "lesc/model.hpp"

namespace lesc {

constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig model;
  LossConfig loss;
  LescParams params;
  // Embedding file the parameters were trained with, relative to the
  // checkpoint's directory, and its table hash.
  std::string embeddings;
  std::uint64_t embedding_hash = 0;
  std::optional<double> threshold;
};

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
// Validates version, shapes against the stored ModelConfig, and finiteness.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Loads the referenced embedding file and checks it against the stored hash.
EmbeddingTable load_checkpoint_embeddings(const Checkpoint& c, const std::filesystem::path& checkpoint_path,
                                          const KnowledgeGraph& kg);

}  // namespace lesc
