#include "pathrec/inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <unordered_map>

#include <json.hpp>

namespace pathrec {
namespace {

struct Beam {
  std::vector<Edge> steps;
  double log_prob = 0.0;
  StateEncoding state;
};

struct Expansion {
  std::size_t beam = 0;
  Edge action;
  double log_prob = 0.0;
};

}  // namespace

std::vector<ScoredPath> beam_search(const PolicyParams& policy, const ActionSampler& actions,
                                    EntityId user, int max_len, std::size_t beam_width) {
  if (beam_width == 0) throw ConfigError("beam width must be >= 1");
  if (max_len < 1) throw ConfigError("max path length must be >= 1");

  std::vector<Beam> beams(1);
  beams[0].steps.push_back({kStartRelation, user});
  beams[0].state = encode_initial(policy, user);

  std::vector<Expansion> expansions;
  for (int t = 0; t < max_len; ++t) {
    expansions.clear();
    for (std::size_t b = 0; b < beams.size(); ++b) {
      const auto candidates = actions.fixed(beams[b].steps.back().target);
      const Eigen::VectorXd query = policy_head(policy, beams[b].state.hidden);
      Eigen::VectorXd logits(static_cast<Eigen::Index>(candidates.size()));
      for (std::size_t j = 0; j < candidates.size(); ++j) {
        logits[static_cast<Eigen::Index>(j)] =
            action_embedding(policy.embeddings, candidates[j]).dot(query);
      }
      const double max_logit = logits.maxCoeff();
      const double log_z = max_logit + std::log((logits.array() - max_logit).exp().sum());
      for (std::size_t j = 0; j < candidates.size(); ++j) {
        expansions.push_back(
            {b, candidates[j], beams[b].log_prob + logits[static_cast<Eigen::Index>(j)] - log_z});
      }
    }

    auto better = [](const Expansion& a, const Expansion& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      if (a.action.target != b.action.target) return a.action.target < b.action.target;
      if (a.action.relation != b.action.relation) return a.action.relation < b.action.relation;
      return a.beam < b.beam;
    };
    const std::size_t keep = std::min(beam_width, expansions.size());
    std::partial_sort(expansions.begin(), expansions.begin() + static_cast<std::ptrdiff_t>(keep),
                      expansions.end(), better);

    std::vector<Beam> next;
    next.reserve(keep);
    for (std::size_t n = 0; n < keep; ++n) {
      const Expansion& x = expansions[n];
      Beam nb;
      nb.steps = beams[x.beam].steps;
      nb.steps.push_back(x.action);
      nb.log_prob = x.log_prob;
      if (t + 1 < max_len) nb.state = encode_step(policy, beams[x.beam].state, x.action);
      next.push_back(std::move(nb));
    }
    beams = std::move(next);
  }

  std::vector<ScoredPath> out;
  out.reserve(beams.size());
  for (auto& b : beams) out.push_back({std::move(b.steps), b.log_prob});
  return out;
}

std::vector<ScoredPath> dedup(const IntegratedGraph& graph, std::vector<ScoredPath> paths) {
  std::unordered_map<EntityId, std::size_t> best;
  std::vector<ScoredPath> kept;
  for (auto& p : paths) {
    const EntityId item = p.terminal();
    if (!graph.is_item(item)) continue;
    const auto it = best.find(item);
    if (it == best.end()) {
      best.emplace(item, kept.size());
      kept.push_back(std::move(p));
    } else if (p.log_prob > kept[it->second].log_prob) {
      kept[it->second] = std::move(p);
    }
  }
  std::sort(kept.begin(), kept.end(), [](const ScoredPath& a, const ScoredPath& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.terminal() < b.terminal();
  });
  return kept;
}

RankStrategy parse_strategy(std::string_view name) {
  if (name == "path") return RankStrategy::PathProb;
  if (name == "reward") return RankStrategy::Reward;
  throw ConfigError("unknown ranking strategy '" + std::string(name) + "' (expected path|reward)");
}

std::string_view strategy_name(RankStrategy strategy) {
  return strategy == RankStrategy::PathProb ? "path" : "reward";
}

std::vector<EntityId> RecommendationList::items() const {
  std::vector<EntityId> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.item);
  return out;
}

RecommendationList rank(std::span<const ScoredPath> paths, RankStrategy strategy,
                        const ScoreModel& score_model, EntityId user, std::size_t k,
                        const std::unordered_set<EntityId>& exclusions) {
  RecommendationList list;
  list.user = user;
  std::unordered_set<EntityId> seen;
  for (const auto& p : paths) {
    const EntityId item = p.terminal();
    if (exclusions.count(item) || !seen.insert(item).second) continue;
    const double score =
        strategy == RankStrategy::PathProb ? p.log_prob : score_model.shaping_score(user, item);
    list.entries.push_back({item, score, p});
  }
  std::sort(list.entries.begin(), list.entries.end(),
            [](const Recommendation& a, const Recommendation& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.item < b.item;
            });
  if (list.entries.size() > k) {
    list.entries.resize(k);
  } else if (list.entries.size() < k) {
    list.short_list = true;
  }
  return list;
}

RecommendationList recommend(const PolicyParams& policy, const ActionSampler& actions,
                             const ScoreModel& score_model, EntityId user,
                             const RecommendOptions& options,
                             const std::unordered_set<EntityId>& exclusions) {
  auto paths = dedup(actions.graph(),
                     beam_search(policy, actions, user, options.max_len, options.beam_width));
  return rank(paths, options.strategy, score_model, user, options.k, exclusions);
}

std::vector<Edge> strip_self_loops(std::span<const Edge> steps) {
  std::vector<Edge> out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i > 0 && steps[i].relation == kSelfLoop) continue;
    out.push_back(steps[i]);
  }
  return out;
}

std::string render_path(const IntegratedGraph& graph, std::span<const Edge> steps) {
  const auto shown = strip_self_loops(steps);
  std::string out;
  for (std::size_t i = 0; i < shown.size(); ++i) {
    if (i > 0) out += " --" + graph.relation_label(shown[i].relation) + "--> ";
    out += graph.label(shown[i].target);
  }
  return out;
}

void write_jsonl(std::ostream& out, const IntegratedGraph& graph,
                 std::span<const RecommendationList> lists) {
  for (const auto& list : lists) {
    nlohmann::json record;
    record["user"] = graph.label(list.user);
    record["short"] = list.short_list;
    record["items"] = nlohmann::json::array();
    for (const auto& e : list.entries) {
      nlohmann::json entry;
      entry["item"] = graph.label(e.item);
      entry["score"] = e.score;
      entry["log_prob"] = e.path.log_prob;
      entry["explanation"] = render_path(graph, e.path.steps);
      nlohmann::json hops = nlohmann::json::array();
      for (std::size_t i = 1; i < e.path.steps.size(); ++i) {
        const Edge& s = e.path.steps[i];
        hops.push_back({{"relation", graph.relation_label(s.relation)},
                        {"entity", graph.label(s.target)},
                        {"kind", kind_name(graph.kind(s.target))}});
      }
      entry["path"] = std::move(hops);
      record["items"].push_back(std::move(entry));
    }
    out << record.dump() << '\n';
  }
}

void write_jsonl(const std::filesystem::path& path, const IntegratedGraph& graph,
                 std::span<const RecommendationList> lists) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_jsonl(out, graph, lists);
}

std::vector<RecommendationList> read_jsonl(const std::filesystem::path& path,
                                           const IntegratedGraph& graph) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<RecommendationList> lists;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& why) {
    return DataError(path.string() + ":" + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw fail(e.what());
    }
    RecommendationList list;
    const auto user = graph.find(EntityKind::User, record.at("user").get<std::string>());
    if (!user) throw fail("unknown user");
    list.user = *user;
    list.short_list = record.value("short", false);
    for (const auto& entry : record.at("items")) {
      Recommendation rec;
      const auto item = graph.find(EntityKind::Item, entry.at("item").get<std::string>());
      if (!item) throw fail("unknown item");
      rec.item = *item;
      rec.score = entry.at("score").get<double>();
      rec.path.log_prob = entry.value("log_prob", 0.0);
      rec.path.steps.push_back({kStartRelation, *user});
      for (const auto& hop : entry.at("path")) {
        const auto rel = graph.find_relation(hop.at("relation").get<std::string>());
        const auto kind = parse_kind(hop.at("kind").get<std::string>());
        const auto ent = graph.find(kind, hop.at("entity").get<std::string>());
        if (!rel || !ent) throw fail("path references unknown relation or entity");
        rec.path.steps.push_back({*rel, *ent});
      }
      list.entries.push_back(std::move(rec));
    }
    lists.push_back(std::move(list));
  }
  return lists;
}

void write_report(std::ostream& out, const IntegratedGraph& graph,
                  std::span<const RecommendationList> lists) {
  for (const auto& list : lists) {
    out << "user " << graph.label(list.user);
    if (list.short_list) out << " (fewer than K candidates)";
    out << '\n';
    for (std::size_t r = 0; r < list.entries.size(); ++r) {
      const auto& e = list.entries[r];
      out << "  " << (r + 1) << ". " << graph.label(e.item) << "  [" << e.score << "]  "
          << render_path(graph, e.path.steps) << '\n';
    }
  }
}

}  // namespace pathrec
