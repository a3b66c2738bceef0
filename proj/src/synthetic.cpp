#include "pathrec/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace pathrec {
namespace {

std::string name(const char* prefix, std::size_t i) { return prefix + std::to_string(i); }

}  // namespace

PlantedFixture planted_fixture(const PlantedConfig& c) {
  if (c.genres == 0 || c.users_per_half == 0) {
    throw ConfigError("planted fixture needs at least one genre and user");
  }
  if (c.genre_attributes < 1 || c.genre_attributes > 3) {
    throw ConfigError("genre_attributes must lie in [1, 3]");
  }
  if (c.decoy_pairs == 0 || c.decoys_per_user > c.decoy_pairs) {
    throw ConfigError("need decoy_pairs >= 1 and decoys_per_user <= decoy_pairs");
  }
  Rng rng(c.seed);
  PlantedFixture f;
  for (std::size_t d = 0; d < 2 * c.decoy_pairs; ++d) {
    f.input.triplets.push_back({name("decoy", d), "HasTag", name("tag", d / 2), 0});
  }

  // Pairs are dealt from a reshuffled deck so that every decoy is owned by
  // someone and stays an item of the graph.
  std::vector<std::size_t> deck;
  auto deal = [&](std::size_t n) {
    std::vector<std::size_t> hand;
    while (hand.size() < n) {
      if (deck.empty()) {
        deck.resize(c.decoy_pairs);
        std::iota(deck.begin(), deck.end(), 0);
        std::shuffle(deck.begin(), deck.end(), rng);
      }
      const std::size_t j = deck.back();
      deck.pop_back();
      if (std::find(hand.begin(), hand.end(), j) == hand.end()) hand.push_back(j);
    }
    return hand;
  };

  static const char* const kRelations[3] = {"HasGenre", "HasStyle", "HasEra"};
  static const char* const kPrefixes[3] = {"genre", "style", "era"};
  std::size_t next_user = 0;
  for (std::size_t g = 0; g < c.genres; ++g) {
    auto describe = [&](const std::string& item) {
      for (std::size_t a = 0; a < c.genre_attributes; ++a) {
        f.input.triplets.push_back({item, kRelations[a], name(kPrefixes[a], g), 0});
      }
    };
    const std::string side_item[2] = {name("x", g), name("y", g)};
    for (const auto& item : side_item) describe(item);

    // One orientation per pair and genre keeps the two halves disjoint.
    std::vector<std::size_t> flip(c.decoy_pairs);
    for (auto& b : flip) b = rng() & 1;
    for (std::size_t k = 0; k < c.users_per_half; ++k) {
      std::vector<std::size_t> owned[2];
      for (std::size_t j : deal(c.decoys_per_user)) {
        owned[0].push_back(2 * j + flip[j]);
        owned[1].push_back(2 * j + (1 - flip[j]));
      }
      for (std::size_t side = 0; side < 2; ++side) {
        const std::string u = name("u", next_user + side * c.users_per_half + k);
        f.input.train.push_back({u, side_item[side], 0});
        for (std::size_t d : owned[side]) f.input.train.push_back({u, name("decoy", d), 0});
        f.test.push_back({u, side_item[1 - side], 0});
      }
    }
    next_user += 2 * c.users_per_half;
  }
  f.input.held_out = f.test;
  return f;
}

KgeConfig planted_kge_config(std::uint64_t seed) {
  // Short training: longer runs push sigma(psi) of every unseen pair to ~0.
  KgeConfig k;
  k.epochs = 15;
  k.lr = 0.01;
  k.batch_size = 64;
  k.seed = seed;
  return k;
}

PolicyTrainConfig planted_policy_config(std::uint64_t seed) {
  PolicyTrainConfig p;
  p.epochs = 30;
  p.batch_size = 512;
  p.lr = 3e-4;
  p.rollouts_per_user = 64;
  p.embed_dropout = 0.0;
  p.seed = seed;
  return p;
}

}  // namespace pathrec
