#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace boxgnn::cli {

struct CommandOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::filesystem::path> output;
  std::optional<std::filesystem::path> checkpoint;
};

void gen_synthetic(const CommandOptions& o);
void train_priors(const CommandOptions& o);
void train_fitness(const CommandOptions& o);
void train_joint(const CommandOptions& o);
void attribute(const CommandOptions& o);
void link_eval(const CommandOptions& o);
void export_boxes(const CommandOptions& o);

}  // namespace boxgnn::cli
