#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pathrec/types.hpp"

namespace pathrec {

/// Immutable user-item-entity graph. Every stored edge has its inverse
/// stored too, every vertex carries a self-loop, and neighbor lists are
/// sorted by (relation, target).
class IntegratedGraph {
 public:
  IntegratedGraph() = default;

  std::size_t num_entities() const noexcept { return kinds_.size(); }
  std::size_t num_relations() const noexcept { return relation_labels_.size(); }
  /// Adjacency entries including inverses and self-loops.
  std::size_t num_stored_edges() const noexcept { return edges_.size(); }

  bool contains(EntityId e) const noexcept { return e.index < kinds_.size(); }
  EntityKind kind(EntityId e) const;
  bool is_item(EntityId e) const noexcept {
    return contains(e) && kinds_[e.index] == EntityKind::Item;
  }
  bool is_user(EntityId e) const noexcept {
    return contains(e) && kinds_[e.index] == EntityKind::User;
  }

  /// Action set of `e`: every (r', e') with (e, r', e') in the graph,
  /// self-loop included. Throws std::out_of_range for unknown ids.
  std::span<const Edge> neighbors(EntityId e) const;

  /// True iff (user, Interact, item) is a training interaction.
  bool is_interaction(EntityId user, EntityId item) const noexcept;
  /// Sorted training items of `user` (empty for non-users).
  std::span<const EntityId> training_items(EntityId user) const noexcept;

  RelationId inverse(RelationId r) const noexcept;

  const std::string& label(EntityId e) const { return labels_.at(e.index); }
  const std::string& relation_label(RelationId r) const {
    return relation_labels_.at(r.index);
  }
  std::optional<EntityId> find(EntityKind kind, std::string_view label) const;
  std::optional<RelationId> find_relation(std::string_view label) const;

  const std::vector<EntityId>& users() const noexcept { return users_; }
  const std::vector<EntityId>& items() const noexcept { return items_; }
  std::vector<EntityId> entities_of_kind(EntityKind kind) const;

  /// Interactions and KG triplets as they were added (no inverses, no
  /// self-loops), in insertion order.
  const std::vector<Triplet>& base_triplets() const noexcept { return base_; }
  std::size_t num_training_interactions() const noexcept { return num_interactions_; }

 private:
  friend class GraphBuilder;

  std::vector<EntityKind> kinds_;
  std::vector<std::string> labels_;
  std::vector<std::string> relation_labels_;
  std::vector<std::size_t> offsets_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> item_offsets_;
  std::vector<EntityId> user_items_;
  std::vector<EntityId> users_;
  std::vector<EntityId> items_;
  std::vector<Triplet> base_;
  std::size_t num_interactions_ = 0;
  std::unordered_map<std::string, std::uint32_t> label_index_[3];
  std::unordered_map<std::string, std::uint32_t> relation_index_;
};

/// Assembles an IntegratedGraph. Ids are handed out in first-seen order.
class GraphBuilder {
 public:
  GraphBuilder();

  /// Interns a vertex; returns the existing id when (kind, label) is known.
  EntityId add_entity(EntityKind kind, std::string_view label);
  /// Interns a KG relation together with its generated inverse.
  RelationId add_relation(std::string_view label);
  std::optional<EntityId> find(EntityKind kind, std::string_view label) const {
    return g_.find(kind, label);
  }

  /// Adds a training (user, item) interaction. Duplicates are dropped.
  void add_interaction(EntityId user, EntityId item);
  void add_triplet(EntityId head, RelationId relation, EntityId tail);

  std::size_t duplicates() const noexcept { return duplicates_; }

  IntegratedGraph build() &&;

 private:
  IntegratedGraph g_;
  std::vector<Triplet> triplets_;
  std::size_t duplicates_ = 0;
};

/// Raw labelled records, each carrying its 1-based source line.
struct Interaction {
  std::string user;
  std::string item;
  std::size_t line = 0;
};

struct LabeledTriplet {
  std::string head;
  std::string relation;
  std::string tail;
  std::size_t line = 0;
};

struct ItemMatch {
  std::string item;
  std::string entity;
  std::size_t line = 0;
};

struct GraphInput {
  /// Inserted as Interact edges.
  std::vector<Interaction> train;
  /// Validation/test pairs: their users and items become vertices, no edges.
  std::vector<Interaction> held_out;
  std::vector<LabeledTriplet> triplets;
  /// Item label -> KG entity label. Empty means items are not linked to the KG.
  std::vector<ItemMatch> matches;
};

struct BuildOptions {
  /// When false, KG entities and relations are still interned (ids stay
  /// stable) but no KG edges are inserted.
  bool include_kg = true;
};

struct BuildReport {
  std::size_t duplicate_edges = 0;
};

/// Merges the interaction graph and the KG into G'. Throws DataError naming
/// the offending line for unresolvable references.
IntegratedGraph build_graph(const GraphInput& input, const BuildOptions& options = {},
                            BuildReport* report = nullptr);

/// TSV snapshot with a "#pathrec-graph<TAB>1" version header.
void save_graph(const IntegratedGraph& graph, const std::filesystem::path& path);
IntegratedGraph load_graph(const std::filesystem::path& path);

/// Bounded action sets for high-degree vertices. Vertices with at most
/// `max_fanout` neighbors expose their full list; larger ones are cut to
/// `max_fanout` entries (self-loop always kept).
class ActionSampler {
 public:
  ActionSampler(const IntegratedGraph& graph, std::size_t max_fanout, std::uint64_t seed);

  /// Fixed seeded sample, used at inference.
  std::span<const Edge> fixed(EntityId e) const;
  /// Fresh uniform sample per call, used during training.
  std::vector<Edge> sampled(EntityId e, Rng& rng) const;

  const IntegratedGraph& graph() const noexcept { return *graph_; }
  std::size_t max_fanout() const noexcept { return max_fanout_; }

 private:
  std::vector<Edge> draw(std::span<const Edge> all, Rng& rng) const;

  const IntegratedGraph* graph_;
  std::size_t max_fanout_;
  std::unordered_map<std::uint32_t, std::vector<Edge>> capped_;
};

}  // namespace pathrec
