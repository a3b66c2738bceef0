#include "pathrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace pathrec {
namespace {

std::vector<EntityId> top_k(std::vector<std::pair<EntityId, double>> scored, std::size_t k) {
  auto better = [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  };
  const std::size_t n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                    better);
  std::vector<EntityId> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(scored[i].first);
  return out;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

}  // namespace

ItemSets held_out_sets(const IntegratedGraph& graph, std::span<const Interaction> events) {
  ItemSets sets;
  for (const auto& ev : events) {
    const auto u = graph.find(EntityKind::User, ev.user);
    const auto i = graph.find(EntityKind::Item, ev.item);
    if (!u || !i) {
      throw DataError("line " + std::to_string(ev.line) + ": held-out interaction (" + ev.user +
                      ", " + ev.item + ") is not in the graph");
    }
    sets[*u].push_back(*i);
  }
  for (auto& [u, items] : sets) {
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
  }
  return sets;
}

std::optional<double> hit_ratio_at_k(std::span<const EntityId> ranked,
                                     std::span<const EntityId> test, std::size_t k) {
  if (k == 0) throw ConfigError("k must be >= 1");
  if (test.empty()) return std::nullopt;
  const std::unordered_set<EntityId> wanted(test.begin(), test.end());
  std::unordered_set<EntityId> hits;
  for (std::size_t r = 0; r < std::min(k, ranked.size()); ++r) {
    if (wanted.count(ranked[r])) hits.insert(ranked[r]);
  }
  return static_cast<double>(hits.size()) / static_cast<double>(wanted.size());
}

std::optional<double> ndcg_at_k(std::span<const EntityId> ranked, std::span<const EntityId> test,
                                std::size_t k) {
  if (k == 0) throw ConfigError("k must be >= 1");
  if (test.empty()) return std::nullopt;
  const std::unordered_set<EntityId> wanted(test.begin(), test.end());
  std::unordered_set<EntityId> seen;
  double dcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, ranked.size()); ++r) {
    if (wanted.count(ranked[r]) && seen.insert(ranked[r]).second) {
      dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    }
  }
  double idcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, wanted.size()); ++r) {
    idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  }
  return dcg / idcg;
}

MetricSummary evaluate_rankings(const std::map<EntityId, std::vector<EntityId>>& rankings,
                                const ItemSets& test, std::size_t k) {
  MetricSummary s;
  double hr = 0.0, ndcg = 0.0;
  const std::vector<EntityId> none;
  for (const auto& [user, items] : test) {
    const auto it = rankings.find(user);
    const auto& ranked = it == rankings.end() ? none : it->second;
    const auto h = hit_ratio_at_k(ranked, items, k);
    if (!h) continue;
    hr += *h;
    ndcg += *ndcg_at_k(ranked, items, k);
    ++s.users;
  }
  for (const auto& [user, ranked] : rankings) {
    const auto it = test.find(user);
    if (it == test.end() || it->second.empty()) ++s.skipped;
  }
  if (s.users > 0) {
    s.hr = hr / static_cast<double>(s.users);
    s.ndcg = ndcg / static_cast<double>(s.users);
  }
  return s;
}

MetricSummary evaluate_lists(std::span<const RecommendationList> lists, const ItemSets& test,
                             std::size_t k) {
  std::map<EntityId, std::vector<EntityId>> rankings;
  for (const auto& l : lists) rankings[l.user] = l.items();
  return evaluate_rankings(rankings, test, k);
}

ItemKnn::ItemKnn(const IntegratedGraph& graph)
    : graph_(&graph), support_(graph.num_entities(), 0) {
  for (const EntityId u : graph.users()) {
    for (const EntityId i : graph.training_items(u)) ++support_[i.index];
  }
}

double ItemKnn::cosine(EntityId a, EntityId b) const {
  if (support_.at(a.index) == 0 || support_.at(b.index) == 0) return 0.0;
  std::size_t co = 0;
  for (const EntityId u : graph_->users()) {
    co += graph_->is_interaction(u, a) && graph_->is_interaction(u, b);
  }
  return static_cast<double>(co) /
         std::sqrt(static_cast<double>(support_[a.index]) * support_[b.index]);
}

std::vector<EntityId> ItemKnn::recommend(EntityId user, std::size_t k,
                                         const std::unordered_set<EntityId>& exclusions) const {
  const auto history = graph_->training_items(user);
  if (history.empty()) return {};
  // Each (j, v, i) with v a co-user of history item j adds 1/sqrt(n_i n_j);
  // summed over v that is co(i, j) / sqrt(n_i n_j).
  std::unordered_map<EntityId, double> score;
  for (const EntityId j : history) {
    for (const Edge& e : graph_->neighbors(j)) {
      if (e.relation != kInteractedBy) continue;
      for (const EntityId i : graph_->training_items(e.target)) {
        score[i] += 1.0 / std::sqrt(static_cast<double>(support_[i.index]) * support_[j.index]);
      }
    }
  }
  std::vector<std::pair<EntityId, double>> scored;
  for (const auto& [item, s] : score) {
    if (graph_->is_interaction(user, item) || exclusions.count(item)) continue;
    scored.emplace_back(item, s);
  }
  return top_k(std::move(scored), k);
}

std::vector<EntityId> kge_rec_recommend(const IntegratedGraph& graph, const ScoreModel& model,
                                        EntityId user, std::size_t k,
                                        const std::unordered_set<EntityId>& exclusions) {
  std::vector<std::pair<EntityId, double>> scored;
  for (const EntityId i : graph.items()) {
    if (graph.is_interaction(user, i) || exclusions.count(i)) continue;
    scored.emplace_back(i, model.score(user, kInteract, i));
  }
  return top_k(std::move(scored), k);
}

std::vector<EntityId> random_walk_recommend(const ActionSampler& actions, EntityId user, int steps,
                                            std::size_t k,
                                            const std::unordered_set<EntityId>& exclusions) {
  const IntegratedGraph& graph = actions.graph();
  std::map<EntityId, double> mass{{user, 1.0}};
  for (int t = 0; t < steps; ++t) {
    std::map<EntityId, double> next;
    for (const auto& [e, p] : mass) {
      const auto cands = actions.fixed(e);
      const double share = p / static_cast<double>(cands.size());
      for (const Edge& c : cands) next[c.target] += share;
    }
    mass = std::move(next);
  }
  std::vector<std::pair<EntityId, double>> scored;
  for (const auto& [e, p] : mass) {
    if (!graph.is_item(e) || graph.is_interaction(user, e) || exclusions.count(e)) continue;
    scored.emplace_back(e, p);
  }
  return top_k(std::move(scored), k);
}

std::unordered_set<EntityId> exclusion_set(const IntegratedGraph& graph, EntityId user,
                                           const ItemSets* also) {
  const auto train = graph.training_items(user);
  std::unordered_set<EntityId> out(train.begin(), train.end());
  if (also) {
    if (const auto it = also->find(user); it != also->end()) {
      out.insert(it->second.begin(), it->second.end());
    }
  }
  return out;
}

std::string path_signature(const IntegratedGraph& graph, std::span<const Edge> steps) {
  std::string sig;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i > 0) sig += " -" + graph.relation_label(steps[i].relation) + "-> ";
    sig += kind_tag(graph.kind(steps[i].target));
  }
  return sig;
}

PathPatternStats path_pattern_stats(const IntegratedGraph& graph,
                                    std::span<const RecommendationList> lists) {
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& l : lists) {
    for (const auto& e : l.entries) {
      ++counts[path_signature(graph, e.path.steps)];
      ++total;
    }
  }
  PathPatternStats out;
  for (const auto& [sig, n] : counts) {
    out.emplace_back(sig, 100.0 * static_cast<double>(n) / static_cast<double>(total));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

double MetricReport::mean_hr() const {
  if (runs.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : runs) s += r.summary.hr;
  return s / static_cast<double>(runs.size());
}

double MetricReport::mean_ndcg() const {
  if (runs.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : runs) s += r.summary.ndcg;
  return s / static_cast<double>(runs.size());
}

void write_metric_report(std::ostream& out, std::span<const MetricReport> reports) {
  out << "model\tk\trun\tseed\thr\tndcg\tusers\tskipped\n";
  for (const auto& rep : reports) {
    for (std::size_t r = 0; r < rep.runs.size(); ++r) {
      const auto& run = rep.runs[r];
      out << rep.model << '\t' << rep.k << '\t' << r << '\t' << run.seed << '\t'
          << fmt(run.summary.hr) << '\t' << fmt(run.summary.ndcg) << '\t' << run.summary.users
          << '\t' << run.summary.skipped << '\n';
    }
    out << rep.model << '\t' << rep.k << "\tmean\t-\t" << fmt(rep.mean_hr()) << '\t'
        << fmt(rep.mean_ndcg()) << "\t-\t-\n";
  }
}

void write_metric_report(const std::filesystem::path& path, std::span<const MetricReport> reports) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_metric_report(out, reports);
}

std::vector<MetricReport> read_metric_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<MetricReport> reports;
  std::string line;
  std::getline(in, line);  // header
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string model, k, run, seed, hr, ndcg, users, skipped;
    if (!std::getline(row, model, '\t') || !std::getline(row, k, '\t') ||
        !std::getline(row, run, '\t') || !std::getline(row, seed, '\t') ||
        !std::getline(row, hr, '\t') || !std::getline(row, ndcg, '\t') ||
        !std::getline(row, users, '\t') || !std::getline(row, skipped)) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed metric row");
    }
    if (run == "mean") continue;
    if (reports.empty() || reports.back().model != model) {
      reports.push_back({model, std::stoul(k), {}});
    }
    RunMetrics m;
    m.seed = std::stoull(seed);
    m.summary.hr = std::stod(hr);
    m.summary.ndcg = std::stod(ndcg);
    m.summary.users = std::stoul(users);
    m.summary.skipped = std::stoul(skipped);
    reports.back().runs.push_back(m);
  }
  return reports;
}

void write_patterns(std::ostream& out, const PathPatternStats& stats) {
  out << "pattern\tpercentage\n";
  for (const auto& [sig, pct] : stats) out << sig << '\t' << fmt(pct) << '\n';
}

void write_patterns(const std::filesystem::path& path, const PathPatternStats& stats) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_patterns(out, stats);
}

}  // namespace pathrec
