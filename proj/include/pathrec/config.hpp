#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "pathrec/inference.hpp"
#include "pathrec/kge.hpp"
#include "pathrec/trainer.hpp"

namespace pathrec {

/// Everything a pipeline run needs. Keys in a config file use the field
/// names below (plus the aliases d, h and T for dim, hidden and max_len).
struct RunConfig {
  // Raw inputs for ingest, or a directory already holding train/valid/test.
  std::filesystem::path interactions;
  std::filesystem::path triplets;
  std::filesystem::path matches;
  std::filesystem::path data;
  std::filesystem::path out = "runs";

  int dim = 32;
  int kge_epochs = 50;
  int negatives = 8;
  double kge_lr = 1e-3;
  double kge_dropout = 0.0;
  std::uint64_t kge_batch = 512;
  bool kge_interactions = true;
  bool no_kg = false;

  int hidden = 64;
  int max_len = 3;
  std::uint64_t batch = 512;
  int policy_epochs = 30;
  double policy_lr = 1e-3;
  double action_dropout = 0.5;
  double embed_dropout = 0.1;
  double clip_norm = 5.0;
  std::uint64_t max_fanout = 512;
  int rollouts_per_user = 1;
  bool baseline = false;
  bool no_reward_shaping = false;
  bool no_action_dropout = false;
  bool freeze_embeddings = false;

  std::uint64_t beam = 64;
  std::uint64_t k = 10;
  RankStrategy strategy = RankStrategy::PathProb;

  int runs = 5;
  std::uint64_t seed = 1;
};

enum class Stage { Ingest, TrainKge, TrainPolicy, Recommend, Evaluate };
inline constexpr Stage kStages[] = {Stage::Ingest, Stage::TrainKge, Stage::TrainPolicy,
                                    Stage::Recommend, Stage::Evaluate};
std::string_view stage_name(Stage stage);

/// One `key = value` line of a config file.
struct Setting {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

/// Splits flat `key = value` text; `#` starts a comment. Throws ConfigError
/// naming the first line that is neither blank, a comment nor an assignment.
std::vector<Setting> parse_settings(std::string_view text);

/// Applies settings in order and returns one message per bad key or value.
std::vector<std::string> apply_settings(RunConfig& config, const std::vector<Setting>& settings);

/// PATHREC_<KEY> variables, in key order. `lookup` defaults to getenv.
std::vector<Setting> env_settings(
    const std::function<const char*(const char*)>& lookup = {});

/// Range checks; one message per violated constraint.
std::vector<std::string> check_config(const RunConfig& config);

struct ValidatedConfig {
  RunConfig config;
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};

/// Defaults, then the file text; reports every violation at once.
ValidatedConfig validate_config(std::string_view text);

/// Canonical `key = value` dump of every field, parseable by parse_settings.
std::string to_text(const RunConfig& config);

/// FNV-1a over every field that changes results (not `out`).
std::uint64_t config_hash(const RunConfig& config);

/// Hash of the fields that feed `stage` and the stages before it, plus the
/// run seed.
std::uint64_t stage_hash(const RunConfig& config, Stage stage, std::uint64_t run_seed);

std::string hex_hash(std::uint64_t hash);

/// Seed of run k (0-based).
inline std::uint64_t run_seed(const RunConfig& config, int run) {
  return config.seed + static_cast<std::uint64_t>(run);
}

KgeConfig kge_config(const RunConfig& config, std::uint64_t seed);
PolicyTrainConfig policy_config(const RunConfig& config, std::uint64_t seed);
RecommendOptions recommend_options(const RunConfig& config);
BuildOptions build_options(const RunConfig& config);

}  // namespace pathrec
