#pragma once

// Shared fixtures for the unit tests.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <unistd.h>
#include <random>
#include <string>
#include <vector>

#include "pathrec/graph.hpp"
#include "pathrec/kge.hpp"
#include "pathrec/policy.hpp"

namespace testing {

using namespace pathrec;

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("pathrec-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

/// Random labelled input: `users` users, `items` items, `attrs` attributes,
/// each user with 1..4 training items, each item with 0..2 attribute links
/// over `relations` relation labels.
inline GraphInput random_input(Rng& rng, int users, int items, int attrs, int relations = 2) {
  GraphInput in;
  std::uniform_int_distribution<int> pick_item(0, items - 1);
  std::uniform_int_distribution<int> pick_attr(0, attrs - 1);
  std::uniform_int_distribution<int> pick_rel(0, relations - 1);
  std::uniform_int_distribution<int> per_user(1, 4);
  std::uniform_int_distribution<int> per_item(0, 2);
  for (int u = 0; u < users; ++u) {
    const int n = per_user(rng);
    for (int k = 0; k < n; ++k) {
      in.train.push_back({"u" + std::to_string(u), "i" + std::to_string(pick_item(rng)), 0});
    }
  }
  if (attrs > 0) {
    for (int i = 0; i < items; ++i) {
      const int n = per_item(rng);
      for (int k = 0; k < n; ++k) {
        in.triplets.push_back({"i" + std::to_string(i), "r" + std::to_string(pick_rel(rng)),
                               "a" + std::to_string(pick_attr(rng)), 0});
      }
    }
  }
  return in;
}

/// Random graph with at most `max_vertices` vertices.
inline IntegratedGraph random_graph(Rng& rng, int max_vertices = 30) {
  std::uniform_int_distribution<int> users(1, max_vertices / 3);
  std::uniform_int_distribution<int> items(1, max_vertices / 3);
  std::uniform_int_distribution<int> attrs(0, max_vertices / 3);
  return build_graph(random_input(rng, users(rng), items(rng), attrs(rng)));
}

/// A policy with embeddings of scale ~1 so that distributions are far from
/// uniform.
inline PolicyParams random_policy(const IntegratedGraph& g, int dim, int hidden, Rng& rng) {
  EmbeddingTable table = EmbeddingTable::uniform(g.num_entities(), g.num_relations(), dim, rng);
  table.entities *= 2.0 * dim;
  table.relations *= 2.0 * dim;
  PolicyParams p = PolicyParams::initialize(table, hidden, rng);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (Eigen::Index k = 0; k < p.lstm_bias.size(); ++k) p.lstm_bias[k] += u(rng);
  for (Eigen::Index k = 0; k < p.b1.size(); ++k) p.b1[k] = u(rng);
  for (Eigen::Index k = 0; k < p.b2.size(); ++k) p.b2[k] = u(rng);
  return p;
}

inline EntityId id(const IntegratedGraph& g, EntityKind kind, const std::string& label) {
  const auto e = g.find(kind, label);
  if (!e) throw std::runtime_error("no entity " + label);
  return *e;
}

}  // namespace testing
