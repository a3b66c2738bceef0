#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pathrec {

/// Dense index of a vertex of the integrated graph (users, items and KG
/// entities share one id space).
struct EntityId {
  std::uint32_t index = 0;

  constexpr auto operator<=>(const EntityId&) const = default;
};

/// Dense index into the relation set, which holds the reserved relations
/// below followed by (relation, inverse) pairs for every KG relation.
struct RelationId {
  std::uint32_t index = 0;

  constexpr auto operator<=>(const RelationId&) const = default;
};

/// Artificial relation paired with the user in the initial state.
inline constexpr RelationId kStartRelation{0};
inline constexpr RelationId kSelfLoop{1};
inline constexpr RelationId kInteract{2};
inline constexpr RelationId kInteractedBy{3};
inline constexpr std::uint32_t kFirstKgRelation = 4;

enum class EntityKind : std::uint8_t { User, Item, Attribute };

std::string_view kind_name(EntityKind kind);
/// Single-letter tag used in path signatures ("U", "I", "A").
std::string_view kind_tag(EntityKind kind);
EntityKind parse_kind(std::string_view name);

/// An outgoing edge, i.e. one MDP action (r', e').
struct Edge {
  RelationId relation;
  EntityId target;

  constexpr auto operator<=>(const Edge&) const = default;
};

struct Triplet {
  EntityId head;
  RelationId relation;
  EntityId tail;

  constexpr auto operator<=>(const Triplet&) const = default;
};

using Rng = std::mt19937_64;

/// Malformed or inconsistent input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration values or flags.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure during training (non-finite loss or gradient).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pathrec

template <>
struct std::hash<pathrec::EntityId> {
  std::size_t operator()(pathrec::EntityId id) const noexcept {
    return std::hash<std::uint32_t>{}(id.index);
  }
};

template <>
struct std::hash<pathrec::RelationId> {
  std::size_t operator()(pathrec::RelationId id) const noexcept {
    return std::hash<std::uint32_t>{}(id.index);
  }
};
