#include "pathrec/graph.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace pathrec {

std::string_view kind_name(EntityKind kind) {
  switch (kind) {
    case EntityKind::User: return "user";
    case EntityKind::Item: return "item";
    case EntityKind::Attribute: return "attribute";
  }
  return "?";
}

std::string_view kind_tag(EntityKind kind) {
  switch (kind) {
    case EntityKind::User: return "U";
    case EntityKind::Item: return "I";
    case EntityKind::Attribute: return "A";
  }
  return "?";
}

EntityKind parse_kind(std::string_view name) {
  if (name == "user") return EntityKind::User;
  if (name == "item") return EntityKind::Item;
  if (name == "attribute") return EntityKind::Attribute;
  throw DataError("unknown entity kind '" + std::string(name) + "'");
}

EntityKind IntegratedGraph::kind(EntityId e) const {
  if (!contains(e)) throw std::out_of_range("entity id " + std::to_string(e.index));
  return kinds_[e.index];
}

std::span<const Edge> IntegratedGraph::neighbors(EntityId e) const {
  if (!contains(e)) throw std::out_of_range("entity id " + std::to_string(e.index));
  const std::size_t begin = offsets_[e.index];
  const std::size_t end = offsets_[e.index + 1];
  return {edges_.data() + begin, end - begin};
}

std::span<const EntityId> IntegratedGraph::training_items(EntityId user) const noexcept {
  if (!is_user(user)) return {};
  const std::size_t begin = item_offsets_[user.index];
  const std::size_t end = item_offsets_[user.index + 1];
  return {user_items_.data() + begin, end - begin};
}

bool IntegratedGraph::is_interaction(EntityId user, EntityId item) const noexcept {
  if (!is_item(item)) return false;
  const auto items = training_items(user);
  return std::binary_search(items.begin(), items.end(), item);
}

RelationId IntegratedGraph::inverse(RelationId r) const noexcept {
  if (r == kStartRelation || r == kSelfLoop) return r;
  return RelationId{r.index ^ 1u};
}

std::optional<EntityId> IntegratedGraph::find(EntityKind kind, std::string_view label) const {
  const auto& index = label_index_[static_cast<int>(kind)];
  const auto it = index.find(std::string(label));
  if (it == index.end()) return std::nullopt;
  return EntityId{it->second};
}

std::optional<RelationId> IntegratedGraph::find_relation(std::string_view label) const {
  const auto it = relation_index_.find(std::string(label));
  if (it == relation_index_.end()) return std::nullopt;
  return RelationId{it->second};
}

std::vector<EntityId> IntegratedGraph::entities_of_kind(EntityKind kind) const {
  std::vector<EntityId> out;
  for (std::uint32_t i = 0; i < kinds_.size(); ++i) {
    if (kinds_[i] == kind) out.push_back(EntityId{i});
  }
  return out;
}

GraphBuilder::GraphBuilder() {
  for (const char* label : {"Start", "SelfLoop", "Interact", "InteractedBy"}) {
    g_.relation_index_.emplace(label, static_cast<std::uint32_t>(g_.relation_labels_.size()));
    g_.relation_labels_.emplace_back(label);
  }
}

EntityId GraphBuilder::add_entity(EntityKind kind, std::string_view label) {
  auto& index = g_.label_index_[static_cast<int>(kind)];
  const auto [it, inserted] =
      index.emplace(std::string(label), static_cast<std::uint32_t>(g_.kinds_.size()));
  if (inserted) {
    g_.kinds_.push_back(kind);
    g_.labels_.emplace_back(label);
  }
  return EntityId{it->second};
}

RelationId GraphBuilder::add_relation(std::string_view label) {
  if (const auto it = g_.relation_index_.find(std::string(label));
      it != g_.relation_index_.end()) {
    if (it->second < kFirstKgRelation) {
      throw DataError("relation label '" + std::string(label) + "' is reserved");
    }
    return RelationId{it->second};
  }
  const auto id = static_cast<std::uint32_t>(g_.relation_labels_.size());
  std::string inverse = std::string(label) + "_inv";
  g_.relation_index_.emplace(std::string(label), id);
  g_.relation_labels_.emplace_back(label);
  // An input relation literally named "<x>_inv" keeps its own id pair.
  g_.relation_index_.emplace(inverse, id + 1);
  g_.relation_labels_.push_back(std::move(inverse));
  return RelationId{id};
}

void GraphBuilder::add_interaction(EntityId user, EntityId item) {
  if (!g_.is_user(user) || !g_.is_item(item)) {
    throw DataError("interaction (" + std::to_string(user.index) + ", " +
                    std::to_string(item.index) + ") must link a user to an item");
  }
  triplets_.push_back({user, kInteract, item});
}

void GraphBuilder::add_triplet(EntityId head, RelationId relation, EntityId tail) {
  if (!g_.contains(head) || !g_.contains(tail)) {
    throw DataError("triplet references unknown entity id");
  }
  if (relation.index < kFirstKgRelation || relation.index >= g_.relation_labels_.size()) {
    throw DataError("triplet uses reserved or unknown relation id " +
                    std::to_string(relation.index));
  }
  triplets_.push_back({head, relation, tail});
}

IntegratedGraph GraphBuilder::build() && {
  IntegratedGraph& g = g_;
  const std::size_t n = g.kinds_.size();

  std::set<Triplet> seen;
  for (const Triplet& t : triplets_) {
    if (seen.insert(t).second) {
      g.base_.push_back(t);
    } else {
      ++duplicates_;
    }
  }

  std::vector<std::vector<Edge>> adjacency(n);
  std::vector<std::vector<EntityId>> items_of(n);
  for (std::uint32_t v = 0; v < n; ++v) adjacency[v].push_back({kSelfLoop, EntityId{v}});
  for (const Triplet& t : g.base_) {
    adjacency[t.head.index].push_back({t.relation, t.tail});
    adjacency[t.tail.index].push_back({g.inverse(t.relation), t.head});
    if (t.relation == kInteract) {
      items_of[t.head.index].push_back(t.tail);
      ++g.num_interactions_;
    }
  }

  g.offsets_.assign(1, 0);
  g.item_offsets_.assign(1, 0);
  for (std::uint32_t v = 0; v < n; ++v) {
    auto& list = adjacency[v];
    std::sort(list.begin(), list.end());
    const auto last = std::unique(list.begin(), list.end());
    duplicates_ += static_cast<std::size_t>(list.end() - last);
    list.erase(last, list.end());
    g.edges_.insert(g.edges_.end(), list.begin(), list.end());
    g.offsets_.push_back(g.edges_.size());

    auto& items = items_of[v];
    std::sort(items.begin(), items.end());
    g.user_items_.insert(g.user_items_.end(), items.begin(), items.end());
    g.item_offsets_.push_back(g.user_items_.size());

    if (g.kinds_[v] == EntityKind::User) g.users_.push_back(EntityId{v});
    if (g.kinds_[v] == EntityKind::Item) g.items_.push_back(EntityId{v});
  }
  return std::move(g_);
}

namespace {

std::string at_line(std::size_t line) {
  return line > 0 ? "line " + std::to_string(line) + ": " : std::string();
}

}  // namespace

IntegratedGraph build_graph(const GraphInput& input, const BuildOptions& options,
                            BuildReport* report) {
  GraphBuilder builder;

  auto intern_pair = [&](const Interaction& x) {
    if (x.user.empty() || x.item.empty()) {
      throw DataError(at_line(x.line) + "interaction with empty user or item label");
    }
    return std::pair{builder.add_entity(EntityKind::User, x.user),
                     builder.add_entity(EntityKind::Item, x.item)};
  };

  std::vector<std::pair<EntityId, EntityId>> train_ids;
  train_ids.reserve(input.train.size());
  for (const auto& x : input.train) train_ids.push_back(intern_pair(x));
  for (const auto& x : input.held_out) intern_pair(x);

  // KG entity label -> item vertex. Without a match table, KG entities that
  // carry an item's label are that item.
  std::unordered_map<std::string, std::string> entity_to_item;
  std::unordered_map<std::string, bool> item_matched;
  for (const auto& m : input.matches) {
    if (m.item.empty() || m.entity.empty()) {
      throw DataError(at_line(m.line) + "item match with empty label");
    }
    entity_to_item.emplace(m.entity, m.item);
    item_matched[m.item] = true;
  }
  if (!input.matches.empty()) {
    for (const auto* list : {&input.train, &input.held_out}) {
      for (const auto& x : *list) {
        if (!item_matched.count(x.item)) {
          throw DataError(at_line(x.line) + "item '" + x.item +
                          "' has no matching KG entity (dangling reference)");
        }
      }
    }
  }

  auto resolve = [&](const std::string& entity, std::size_t line) {
    if (entity.empty()) throw DataError(at_line(line) + "triplet with empty entity label");
    if (input.matches.empty()) {
      if (auto id = builder.find(EntityKind::Item, entity)) return *id;
    } else if (const auto it = entity_to_item.find(entity); it != entity_to_item.end()) {
      if (auto id = builder.find(EntityKind::Item, it->second)) return *id;
    }
    return builder.add_entity(EntityKind::Attribute, entity);
  };

  for (const auto& t : input.triplets) {
    if (t.relation.empty()) throw DataError(at_line(t.line) + "triplet with empty relation");
    const EntityId head = resolve(t.head, t.line);
    RelationId relation;
    try {
      relation = builder.add_relation(t.relation);
    } catch (const DataError& e) {
      throw DataError(at_line(t.line) + e.what());
    }
    const EntityId tail = resolve(t.tail, t.line);
    if (options.include_kg) builder.add_triplet(head, relation, tail);
  }

  for (const auto& [user, item] : train_ids) builder.add_interaction(user, item);

  IntegratedGraph graph = std::move(builder).build();
  if (report) report->duplicate_edges = builder.duplicates();
  return graph;
}

void save_graph(const IntegratedGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write graph snapshot " + path.string());
  out << "#pathrec-graph\t1\n";
  out << "entities\t" << graph.num_entities() << '\n';
  for (std::uint32_t i = 0; i < graph.num_entities(); ++i) {
    const EntityId e{i};
    out << kind_name(graph.kind(e)) << '\t' << graph.label(e) << '\n';
  }
  const std::size_t kg_relations = (graph.num_relations() - kFirstKgRelation) / 2;
  out << "relations\t" << kg_relations << '\n';
  for (std::size_t j = 0; j < kg_relations; ++j) {
    out << graph.relation_label(RelationId{static_cast<std::uint32_t>(kFirstKgRelation + 2 * j)})
        << '\n';
  }
  out << "edges\t" << graph.base_triplets().size() << '\n';
  for (const Triplet& t : graph.base_triplets()) {
    out << t.head.index << '\t' << t.relation.index << '\t' << t.tail.index << '\n';
  }
  if (!out) throw DataError("failed writing graph snapshot " + path.string());
}

namespace {

std::size_t expect_section(std::istream& in, std::string_view name, std::size_t& line_no) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("graph snapshot truncated before " + std::string(name));
  ++line_no;
  const auto tab = line.find('\t');
  if (tab == std::string::npos || line.substr(0, tab) != name) {
    throw DataError("graph snapshot line " + std::to_string(line_no) + ": expected section '" +
                    std::string(name) + "'");
  }
  return std::stoull(line.substr(tab + 1));
}

}  // namespace

IntegratedGraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open graph snapshot " + path.string());
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || line != "#pathrec-graph\t1") {
    throw DataError("graph snapshot " + path.string() + " has an unsupported header");
  }
  GraphBuilder builder;
  const std::size_t n = expect_section(in, "entities", line_no);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw DataError("graph snapshot truncated in entities");
    ++line_no;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("graph snapshot line " + std::to_string(line_no) + ": malformed entity");
    }
    const EntityId id = builder.add_entity(parse_kind(line.substr(0, tab)), line.substr(tab + 1));
    if (id.index != i) {
      throw DataError("graph snapshot line " + std::to_string(line_no) + ": duplicate entity");
    }
  }
  const std::size_t r = expect_section(in, "relations", line_no);
  for (std::size_t j = 0; j < r; ++j) {
    if (!std::getline(in, line)) throw DataError("graph snapshot truncated in relations");
    ++line_no;
    builder.add_relation(line);
  }
  const std::size_t m = expect_section(in, "edges", line_no);
  for (std::size_t j = 0; j < m; ++j) {
    if (!std::getline(in, line)) throw DataError("graph snapshot truncated in edges");
    ++line_no;
    std::istringstream fields(line);
    std::uint32_t h = 0, rel = 0, t = 0;
    if (!(fields >> h >> rel >> t)) {
      throw DataError("graph snapshot line " + std::to_string(line_no) + ": malformed edge");
    }
    if (RelationId{rel} == kInteract) {
      builder.add_interaction(EntityId{h}, EntityId{t});
    } else {
      builder.add_triplet(EntityId{h}, RelationId{rel}, EntityId{t});
    }
  }
  return std::move(builder).build();
}

ActionSampler::ActionSampler(const IntegratedGraph& graph, std::size_t max_fanout,
                             std::uint64_t seed)
    : graph_(&graph), max_fanout_(max_fanout) {
  if (max_fanout == 0) throw ConfigError("max_fanout must be >= 1");
  for (std::uint32_t v = 0; v < graph.num_entities(); ++v) {
    const auto all = graph.neighbors(EntityId{v});
    if (all.size() <= max_fanout) continue;
    Rng rng(seed ^ (0x9E3779B97F4A7C15ULL * (v + 1)));
    capped_.emplace(v, draw(all, rng));
  }
}

std::span<const Edge> ActionSampler::fixed(EntityId e) const {
  if (const auto it = capped_.find(e.index); it != capped_.end()) return it->second;
  return graph_->neighbors(e);
}

std::vector<Edge> ActionSampler::sampled(EntityId e, Rng& rng) const {
  const auto all = graph_->neighbors(e);
  if (all.size() <= max_fanout_) return {all.begin(), all.end()};
  return draw(all, rng);
}

std::vector<Edge> ActionSampler::draw(std::span<const Edge> all, Rng& rng) const {
  std::vector<Edge> others;
  Edge self{};
  for (const Edge& edge : all) {
    if (edge.relation == kSelfLoop) {
      self = edge;
    } else {
      others.push_back(edge);
    }
  }
  std::vector<Edge> out;
  out.reserve(max_fanout_);
  std::sample(others.begin(), others.end(), std::back_inserter(out), max_fanout_ - 1, rng);
  out.insert(std::lower_bound(out.begin(), out.end(), self), self);
  return out;
}

}  // namespace pathrec
