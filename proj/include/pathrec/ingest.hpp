#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "pathrec/graph.hpp"

namespace pathrec {

std::vector<Interaction> read_interactions(const std::filesystem::path& path);
std::vector<LabeledTriplet> read_triplets(const std::filesystem::path& path);
std::vector<ItemMatch> read_matches(const std::filesystem::path& path);

void write_interactions(const std::filesystem::path& path, std::span<const Interaction> rows);
void write_triplets(const std::filesystem::path& path, std::span<const LabeledTriplet> rows);
void write_matches(const std::filesystem::path& path, std::span<const ItemMatch> rows);

/// Keeps the triplets whose head or tail is an item-matched entity.
std::vector<LabeledTriplet> filter_triplets(std::span<const LabeledTriplet> triplets,
                                            const std::unordered_set<std::string>& item_entities);

struct UnmatchedReport {
  std::size_t removed_events = 0;
  std::size_t dropped_users = 0;
};

/// Drops interactions whose item has no KG match; users left with nothing
/// disappear and are counted in `report`.
std::vector<Interaction> remove_unmatched_items(std::span<const Interaction> interactions,
                                                const std::unordered_set<std::string>& matched_items,
                                                UnmatchedReport* report = nullptr);

/// Collapses repeated (user, item) events to the first occurrence.
std::vector<Interaction> dedup_interactions(std::span<const Interaction> interactions,
                                            std::size_t* removed = nullptr);

struct SplitSizes {
  std::size_t train = 0;
  std::size_t valid = 0;
  std::size_t test = 0;
};

/// valid = floor(0.2 n), test = floor(0.2 n), train = the rest.
SplitSizes split_sizes(std::size_t n);

struct DatasetSplit {
  std::vector<Interaction> train;
  std::vector<Interaction> valid;
  std::vector<Interaction> test;
};

/// Per-user shuffle under `seed`, then 6:2:2 assignment. Users are visited
/// in first-seen order; events must already be deduplicated.
DatasetSplit split_interactions(std::span<const Interaction> events, std::uint64_t seed);

/// Counts laid out like the usual dataset statistics table.
struct DatasetStats {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t events = 0;
  double sparsity = 0.0;
  std::size_t entities = 0;
  std::size_t relations = 0;
  std::size_t triplets = 0;
};

DatasetStats compute_stats(std::span<const Interaction> events,
                           std::span<const LabeledTriplet> triplets);

struct PreparedDataset {
  DatasetSplit split;
  std::vector<LabeledTriplet> triplets;
  std::vector<ItemMatch> matches;
  DatasetStats stats;
  std::size_t duplicate_events = 0;
  UnmatchedReport unmatched;
};

/// dedup -> remove unmatched items -> filter triplets -> split.
/// An empty match table means KG entity labels equal item labels.
PreparedDataset prepare_dataset(std::span<const Interaction> raw_events,
                                std::span<const LabeledTriplet> raw_triplets,
                                std::span<const ItemMatch> matches, std::uint64_t seed);

/// Writes train.tsv, valid.tsv, test.tsv, triplets.tsv, matches.tsv,
/// stats.tsv and graph.tsv (snapshot) into `dir`.
void write_dataset(const std::filesystem::path& dir, const PreparedDataset& data);
void write_stats(const std::filesystem::path& path, const DatasetStats& stats,
                 std::size_t duplicate_events, const UnmatchedReport& unmatched);

/// Reads a directory produced by write_dataset.
PreparedDataset read_dataset(const std::filesystem::path& dir);

GraphInput to_graph_input(const PreparedDataset& data);

}  // namespace pathrec
