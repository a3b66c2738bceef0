#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pathrec/graph.hpp"
#include "pathrec/inference.hpp"
#include "pathrec/kge.hpp"

namespace pathrec {

/// user -> held-out items. Ordered so aggregation is deterministic.
using ItemSets = std::map<EntityId, std::vector<EntityId>>;

/// Builds held-out sets from labelled interactions. Unknown labels are a
/// DataError.
ItemSets held_out_sets(const IntegratedGraph& graph, std::span<const Interaction> events);

/// |top-k ∩ test| / |test|; nullopt when test is empty.
std::optional<double> hit_ratio_at_k(std::span<const EntityId> ranked,
                                     std::span<const EntityId> test, std::size_t k);

/// DCG over hits in the top k divided by the ideal DCG over min(k, |test|)
/// ranks; nullopt when test is empty.
std::optional<double> ndcg_at_k(std::span<const EntityId> ranked, std::span<const EntityId> test,
                                std::size_t k);

struct MetricSummary {
  double hr = 0.0;
  double ndcg = 0.0;
  std::size_t users = 0;    ///< users averaged over
  std::size_t skipped = 0;  ///< ranked users without test items
};

/// Averages per-user HR/NDCG over users with nonempty test sets. A user in
/// `test` without a ranking counts as an empty list.
MetricSummary evaluate_rankings(const std::map<EntityId, std::vector<EntityId>>& rankings,
                                const ItemSets& test, std::size_t k);
MetricSummary evaluate_lists(std::span<const RecommendationList> lists, const ItemSets& test,
                             std::size_t k);

/// Item-based CF over the binary training matrix of the graph.
class ItemKnn {
 public:
  explicit ItemKnn(const IntegratedGraph& graph);

  double cosine(EntityId a, EntityId b) const;
  /// sum over history j of cos(i, j) for every non-training item with a
  /// nonzero score, best first (ties to the smaller id), truncated to k.
  std::vector<EntityId> recommend(EntityId user, std::size_t k,
                                  const std::unordered_set<EntityId>& exclusions = {}) const;

 private:
  const IntegratedGraph* graph_;
  std::vector<std::uint32_t> support_;  // indexed by entity id
};

/// Ranks every item outside the exclusions by psi(u, Interact, i).
std::vector<EntityId> kge_rec_recommend(const IntegratedGraph& graph, const ScoreModel& model,
                                        EntityId user, std::size_t k,
                                        const std::unordered_set<EntityId>& exclusions);

/// Ranks items by the exact probability that a uniform T-step walk over the
/// action sets ends there. Only reachable items are returned.
std::vector<EntityId> random_walk_recommend(const ActionSampler& actions, EntityId user, int steps,
                                            std::size_t k,
                                            const std::unordered_set<EntityId>& exclusions);

/// Training items of the user, optionally with the user's validation items.
std::unordered_set<EntityId> exclusion_set(const IntegratedGraph& graph, EntityId user,
                                           const ItemSets* also = nullptr);

/// "U -Interact-> I -BelongsTo-> A ...": entity kinds and relation labels,
/// self-loops included.
std::string path_signature(const IntegratedGraph& graph, std::span<const Edge> steps);

using PathPatternStats = std::vector<std::pair<std::string, double>>;

/// Percentage of all explanation paths per signature, most frequent first.
PathPatternStats path_pattern_stats(const IntegratedGraph& graph,
                                    std::span<const RecommendationList> lists);

struct RunMetrics {
  std::uint64_t seed = 0;
  MetricSummary summary;
};

struct MetricReport {
  std::string model;
  std::size_t k = 10;
  std::vector<RunMetrics> runs;

  double mean_hr() const;
  double mean_ndcg() const;
};

/// TSV: model, k, run, seed, hr, ndcg, users, skipped; one row per run and
/// a "mean" row per model.
void write_metric_report(std::ostream& out, std::span<const MetricReport> reports);
void write_metric_report(const std::filesystem::path& path, std::span<const MetricReport> reports);
std::vector<MetricReport> read_metric_report(const std::filesystem::path& path);

/// TSV: pattern, percentage.
void write_patterns(std::ostream& out, const PathPatternStats& stats);
void write_patterns(const std::filesystem::path& path, const PathPatternStats& stats);

}  // namespace pathrec
