#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "pathrec/graph.hpp"
#include "pathrec/kge.hpp"
#include "pathrec/policy.hpp"

namespace pathrec {

/// A walk from the user: steps[0] is (Start, user), every later step an
/// edge of G' taken from the previous entity.
struct ScoredPath {
  std::vector<Edge> steps;
  double log_prob = 0.0;

  EntityId user() const { return steps.front().target; }
  EntityId terminal() const { return steps.back().target; }
};

/// Breadth-synchronous beam search: T expansions, each keeping the
/// `beam_width` best partial paths by cumulative log-probability, ties
/// broken by (entity, relation) ascending. Returns the surviving length-T
/// paths, best first.
std::vector<ScoredPath> beam_search(const PolicyParams& policy, const ActionSampler& actions,
                                    EntityId user, int max_len, std::size_t beam_width);

/// One path per terminal item (the most probable one); non-item terminals
/// are discarded. Output is ordered by log-probability, then item id.
std::vector<ScoredPath> dedup(const IntegratedGraph& graph, std::vector<ScoredPath> paths);

enum class RankStrategy {
  PathProb,  ///< rank by path log-probability
  Reward,    ///< rank by sigma(psi(user, item))
};

RankStrategy parse_strategy(std::string_view name);
std::string_view strategy_name(RankStrategy strategy);

struct Recommendation {
  EntityId item;
  double score = 0.0;
  ScoredPath path;
};

struct RecommendationList {
  EntityId user;
  std::vector<Recommendation> entries;
  /// Fewer than K candidates survived.
  bool short_list = false;

  std::vector<EntityId> items() const;
};

/// Orders deduplicated paths by `strategy`, drops excluded items, then
/// truncates to K. Ties go to the smaller item id.
RecommendationList rank(std::span<const ScoredPath> paths, RankStrategy strategy,
                        const ScoreModel& score_model, EntityId user, std::size_t k,
                        const std::unordered_set<EntityId>& exclusions);

struct RecommendOptions {
  int max_len = 3;
  std::size_t beam_width = 64;
  std::size_t k = 10;
  RankStrategy strategy = RankStrategy::PathProb;
};

/// beam_search -> dedup -> rank for one user.
RecommendationList recommend(const PolicyParams& policy, const ActionSampler& actions,
                             const ScoreModel& score_model, EntityId user,
                             const RecommendOptions& options,
                             const std::unordered_set<EntityId>& exclusions);

/// Drops self-loop steps; the leading (Start, user) step is kept.
std::vector<Edge> strip_self_loops(std::span<const Edge> steps);

/// "u --Interact--> Titanic --StarredBy--> ..." with self-loops removed.
std::string render_path(const IntegratedGraph& graph, std::span<const Edge> steps);

/// One JSON object per line:
/// {"user":..,"short":..,"items":[{"item":..,"score":..,"explanation":..,
///  "path":[{"relation":..,"entity":..,"kind":..},..]}]}
/// `path` lists every hop after the user, self-loops included.
void write_jsonl(std::ostream& out, const IntegratedGraph& graph,
                 std::span<const RecommendationList> lists);
void write_jsonl(const std::filesystem::path& path, const IntegratedGraph& graph,
                 std::span<const RecommendationList> lists);
std::vector<RecommendationList> read_jsonl(const std::filesystem::path& path,
                                           const IntegratedGraph& graph);

/// Human-readable report: one block per user, one rendered path per item.
void write_report(std::ostream& out, const IntegratedGraph& graph,
                  std::span<const RecommendationList> lists);

}  // namespace pathrec
