#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "pathrec/graph.hpp"
#include "pathrec/kge.hpp"
#include "pathrec/trainer.hpp"

namespace pathrec {

/// Planted-pattern fixture. Each genre has two items X and Y and two halves
/// of users: one half trains on X, the other on Y, and each half holds out
/// the other half's item. Users also own "decoy" items. Decoys come in
/// pairs sharing one tag; user k of one half owns one member of each of its
/// pairs and user k of the other half owns the mirror, so the halves of a
/// genre never share an item and a held-out item is reachable from its user
/// within three hops only as U -Interact-> I -HasGenre-> A -HasGenre_inv-> I.
///
/// The defaults give 30 users, 40 items and 20 attribute entities.
struct PlantedConfig {
  std::size_t genres = 3;
  std::size_t users_per_half = 5;
  /// Attributes shared by a genre's items (HasGenre, HasStyle, HasEra).
  std::size_t genre_attributes = 1;
  std::size_t decoy_pairs = 17;
  std::size_t decoys_per_user = 4;
  std::uint64_t seed = 7;
};

struct PlantedFixture {
  GraphInput input;               ///< train + held_out + triplets, identity matching
  std::vector<Interaction> test;  ///< one (user, held-out item) row per user
};

PlantedFixture planted_fixture(const PlantedConfig& config = {});

/// Training settings that learn the default fixture in a few seconds.
KgeConfig planted_kge_config(std::uint64_t seed);
PolicyTrainConfig planted_policy_config(std::uint64_t seed);

}  // namespace pathrec
