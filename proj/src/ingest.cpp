#include "pathrec/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <unordered_map>

namespace pathrec {
namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

template <typename Row, typename Make>
std::vector<Row> read_tsv(const std::filesystem::path& path, std::size_t columns, Make make) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<Row> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto fields = split_tabs(line);
    if (fields.size() != columns) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(columns) + " tab-separated fields, got " +
                      std::to_string(fields.size()));
    }
    for (const auto& f : fields) {
      if (f.empty()) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": empty field");
      }
    }
    rows.push_back(make(std::move(fields), line_no));
  }
  return rows;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

}  // namespace

std::vector<Interaction> read_interactions(const std::filesystem::path& path) {
  return read_tsv<Interaction>(path, 2, [](std::vector<std::string> f, std::size_t line) {
    return Interaction{std::move(f[0]), std::move(f[1]), line};
  });
}

std::vector<LabeledTriplet> read_triplets(const std::filesystem::path& path) {
  return read_tsv<LabeledTriplet>(path, 3, [](std::vector<std::string> f, std::size_t line) {
    return LabeledTriplet{std::move(f[0]), std::move(f[1]), std::move(f[2]), line};
  });
}

std::vector<ItemMatch> read_matches(const std::filesystem::path& path) {
  return read_tsv<ItemMatch>(path, 2, [](std::vector<std::string> f, std::size_t line) {
    return ItemMatch{std::move(f[0]), std::move(f[1]), line};
  });
}

void write_interactions(const std::filesystem::path& path, std::span<const Interaction> rows) {
  auto out = open_out(path);
  for (const auto& r : rows) out << r.user << '\t' << r.item << '\n';
}

void write_triplets(const std::filesystem::path& path, std::span<const LabeledTriplet> rows) {
  auto out = open_out(path);
  for (const auto& r : rows) out << r.head << '\t' << r.relation << '\t' << r.tail << '\n';
}

void write_matches(const std::filesystem::path& path, std::span<const ItemMatch> rows) {
  auto out = open_out(path);
  for (const auto& r : rows) out << r.item << '\t' << r.entity << '\n';
}

std::vector<LabeledTriplet> filter_triplets(std::span<const LabeledTriplet> triplets,
                                            const std::unordered_set<std::string>& item_entities) {
  std::vector<LabeledTriplet> kept;
  for (const auto& t : triplets) {
    if (item_entities.count(t.head) || item_entities.count(t.tail)) kept.push_back(t);
  }
  return kept;
}

std::vector<Interaction> remove_unmatched_items(std::span<const Interaction> interactions,
                                                const std::unordered_set<std::string>& matched_items,
                                                UnmatchedReport* report) {
  std::vector<Interaction> kept;
  std::unordered_set<std::string> all_users;
  std::unordered_set<std::string> kept_users;
  std::size_t removed = 0;
  for (const auto& x : interactions) {
    all_users.insert(x.user);
    if (matched_items.count(x.item)) {
      kept.push_back(x);
      kept_users.insert(x.user);
    } else {
      ++removed;
    }
  }
  if (report) {
    report->removed_events = removed;
    report->dropped_users = all_users.size() - kept_users.size();
  }
  return kept;
}

std::vector<Interaction> dedup_interactions(std::span<const Interaction> interactions,
                                            std::size_t* removed) {
  std::unordered_set<std::string> seen;
  std::vector<Interaction> out;
  for (const auto& x : interactions) {
    // '\t' cannot occur inside a TSV field, so it is a safe key separator.
    if (seen.insert(x.user + '\t' + x.item).second) out.push_back(x);
  }
  if (removed) *removed = interactions.size() - out.size();
  return out;
}

SplitSizes split_sizes(std::size_t n) {
  SplitSizes s;
  s.valid = n / 5;
  s.test = n / 5;
  s.train = n - s.valid - s.test;
  return s;
}

DatasetSplit split_interactions(std::span<const Interaction> events, std::uint64_t seed) {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<Interaction>> per_user;
  for (const auto& x : events) {
    auto [it, inserted] = per_user.try_emplace(x.user);
    if (inserted) order.push_back(x.user);
    it->second.push_back(x);
  }

  Rng rng(seed);
  DatasetSplit split;
  for (const auto& user : order) {
    auto& list = per_user[user];
    std::shuffle(list.begin(), list.end(), rng);
    const SplitSizes sizes = split_sizes(list.size());
    auto it = list.begin();
    split.train.insert(split.train.end(), it, it + static_cast<std::ptrdiff_t>(sizes.train));
    it += static_cast<std::ptrdiff_t>(sizes.train);
    split.valid.insert(split.valid.end(), it, it + static_cast<std::ptrdiff_t>(sizes.valid));
    it += static_cast<std::ptrdiff_t>(sizes.valid);
    split.test.insert(split.test.end(), it, list.end());
  }
  return split;
}

DatasetStats compute_stats(std::span<const Interaction> events,
                           std::span<const LabeledTriplet> triplets) {
  std::unordered_set<std::string> users, items, entities, relations;
  for (const auto& x : events) {
    users.insert(x.user);
    items.insert(x.item);
  }
  for (const auto& t : triplets) {
    entities.insert(t.head);
    entities.insert(t.tail);
    relations.insert(t.relation);
  }
  DatasetStats s;
  s.users = users.size();
  s.items = items.size();
  s.events = events.size();
  const double cells = static_cast<double>(s.users) * static_cast<double>(s.items);
  s.sparsity = cells > 0 ? 1.0 - static_cast<double>(s.events) / cells : 0.0;
  s.entities = entities.size();
  s.relations = relations.size();
  s.triplets = triplets.size();
  return s;
}

PreparedDataset prepare_dataset(std::span<const Interaction> raw_events,
                                std::span<const LabeledTriplet> raw_triplets,
                                std::span<const ItemMatch> matches, std::uint64_t seed) {
  PreparedDataset out;
  auto events = dedup_interactions(raw_events, &out.duplicate_events);

  std::unordered_set<std::string> matched_items;
  std::unordered_set<std::string> item_entities;
  if (matches.empty()) {
    // Identity matching: an item is matched when some triplet mentions it.
    std::unordered_set<std::string> mentioned;
    for (const auto& t : raw_triplets) {
      mentioned.insert(t.head);
      mentioned.insert(t.tail);
    }
    for (const auto& x : events) {
      if (mentioned.count(x.item)) matched_items.insert(x.item);
    }
    item_entities = matched_items;
  } else {
    for (const auto& m : matches) matched_items.insert(m.item);
  }

  events = remove_unmatched_items(events, matched_items, &out.unmatched);

  if (!matches.empty()) {
    std::unordered_set<std::string> used_items;
    for (const auto& x : events) used_items.insert(x.item);
    for (const auto& m : matches) {
      if (used_items.count(m.item)) {
        out.matches.push_back(m);
        item_entities.insert(m.entity);
      }
    }
  }

  out.triplets = filter_triplets(raw_triplets, item_entities);
  out.stats = compute_stats(events, out.triplets);
  out.split = split_interactions(events, seed);
  return out;
}

void write_stats(const std::filesystem::path& path, const DatasetStats& s,
                 std::size_t duplicate_events, const UnmatchedReport& unmatched) {
  auto out = open_out(path);
  out << "users\titems\tevents\tsparsity\tentities\trelations\ttriplets\n";
  out << s.users << '\t' << s.items << '\t' << s.events << '\t' << std::fixed
      << std::setprecision(2) << 100.0 * s.sparsity << "%\t" << s.entities << '\t'
      << s.relations << '\t' << s.triplets << '\n';
  out << "# duplicate_events=" << duplicate_events
      << " unmatched_events=" << unmatched.removed_events
      << " dropped_users=" << unmatched.dropped_users << '\n';
}

void write_dataset(const std::filesystem::path& dir, const PreparedDataset& data) {
  std::filesystem::create_directories(dir);
  write_interactions(dir / "train.tsv", data.split.train);
  write_interactions(dir / "valid.tsv", data.split.valid);
  write_interactions(dir / "test.tsv", data.split.test);
  write_triplets(dir / "triplets.tsv", data.triplets);
  write_matches(dir / "matches.tsv", data.matches);
  write_stats(dir / "stats.tsv", data.stats, data.duplicate_events, data.unmatched);
  save_graph(build_graph(to_graph_input(data)), dir / "graph.tsv");
}

PreparedDataset read_dataset(const std::filesystem::path& dir) {
  PreparedDataset data;
  data.split.train = read_interactions(dir / "train.tsv");
  data.split.valid = read_interactions(dir / "valid.tsv");
  data.split.test = read_interactions(dir / "test.tsv");
  data.triplets = read_triplets(dir / "triplets.tsv");
  data.matches = read_matches(dir / "matches.tsv");
  std::vector<Interaction> all = data.split.train;
  all.insert(all.end(), data.split.valid.begin(), data.split.valid.end());
  all.insert(all.end(), data.split.test.begin(), data.split.test.end());
  data.stats = compute_stats(all, data.triplets);
  return data;
}

GraphInput to_graph_input(const PreparedDataset& data) {
  GraphInput input;
  input.train = data.split.train;
  input.held_out = data.split.valid;
  input.held_out.insert(input.held_out.end(), data.split.test.begin(), data.split.test.end());
  input.triplets = data.triplets;
  input.matches = data.matches;
  return input;
}

}  // namespace pathrec
