#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "pathrec/config.hpp"
#include "pathrec/ingest.hpp"
#include "pathrec/metrics.hpp"

namespace pathrec {

/// Files of one run directory.
struct RunLayout {
  std::filesystem::path dir;

  std::filesystem::path data() const { return dir / "data"; }
  std::filesystem::path kge() const { return dir / "kge.bin"; }
  std::filesystem::path kge_loss() const { return dir / "kge_loss.tsv"; }
  std::filesystem::path policy() const { return dir / "policy.bin"; }
  std::filesystem::path reward_curve() const { return dir / "reward_curve.tsv"; }
  std::filesystem::path valid_hr() const { return dir / "valid_hr.tsv"; }
  std::filesystem::path recommendations() const { return dir / "recommendations.jsonl"; }
  std::filesystem::path metrics() const { return dir / "metrics.tsv"; }
  std::filesystem::path patterns() const { return dir / "patterns.tsv"; }
  std::filesystem::path stamp(Stage s) const;
  std::filesystem::path failed(Stage s) const;
};

/// run-0, run-1, ... under the output root.
RunLayout run_layout(const RunConfig& config, int run);

/// A prepared dataset with its graph and held-out sets.
struct LoadedData {
  PreparedDataset data;
  IntegratedGraph graph;
  ItemSets valid;
  ItemSets test;
};

LoadedData load_data(const std::filesystem::path& data_dir, const BuildOptions& options);

enum class Model { Ekar, EkarStar, ItemKnn, KgeRec };
inline constexpr Model kModels[] = {Model::Ekar, Model::EkarStar, Model::ItemKnn, Model::KgeRec};
Model parse_model(std::string_view name);
std::string_view model_name(Model model);

/// Per-user top-k lists of one model on the test sets of `d`. Training and
/// validation items are excluded. `policy` and `actions` are only read for
/// the two path-based models.
std::vector<RecommendationList> model_lists(Model model, const LoadedData& d,
                                            const ScoreModel& score_model,
                                            const PolicyParams* policy,
                                            const ActionSampler* actions,
                                            const RecommendOptions& options);

// Stages of one run. Each reads the outputs of the previous ones from the
// layout and writes its own.
void run_ingest(const RunConfig& config, std::uint64_t seed, const RunLayout& layout);
void run_train_kge(const RunConfig& config, std::uint64_t seed, const RunLayout& layout);
void run_train_policy(const RunConfig& config, std::uint64_t seed, const RunLayout& layout);
void run_recommend(const RunConfig& config, std::uint64_t seed, const RunLayout& layout);
void run_evaluate(const RunConfig& config, std::uint64_t seed, const RunLayout& layout);

struct StageOutcome {
  int run = 0;
  Stage stage = Stage::Ingest;
  bool executed = false;
};

using Logger = std::function<void(const std::string&)>;

/// Runs every stage of every run, skipping stages whose stamp matches the
/// current stage hash. A failing stage leaves its partial outputs and a
/// .failed marker, then the exception propagates. Writes config.txt and the
/// aggregated metrics.tsv / patterns.tsv under config.out.
std::vector<StageOutcome> run_pipeline(const RunConfig& config, const Logger& log = {});

/// Mean-over-runs reports for every model, read from the run directories.
std::vector<MetricReport> aggregate_metrics(const RunConfig& config);

}  // namespace pathrec
