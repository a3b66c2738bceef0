#include "pathrec/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "pathrec/inference.hpp"
#include "pathrec/policy.hpp"
#include "pathrec/trainer.hpp"

namespace pathrec {
namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

ScoreModel load_score_model(const std::filesystem::path& path, const IntegratedGraph& graph) {
  EmbeddingTable table = load_embeddings(path);
  if (static_cast<std::size_t>(table.entities.rows()) != graph.num_entities() ||
      static_cast<std::size_t>(table.relations.rows()) != graph.num_relations()) {
    throw DataError(path.string() + " does not match the graph (" +
                    std::to_string(table.entities.rows()) + " entities in file, " +
                    std::to_string(graph.num_entities()) + " in graph)");
  }
  return ScoreModel(std::move(table));
}

std::string stamp_text(Stage stage, std::uint64_t hash, std::uint64_t seed,
                       const RunConfig& config) {
  std::ostringstream s;
  s << "stage\t" << stage_name(stage) << "\nhash\t" << hex_hash(hash) << "\nseed\t" << seed
    << "\nconfig\t" << hex_hash(config_hash(config)) << '\n';
  return s.str();
}

bool stamp_matches(const std::filesystem::path& stamp, std::uint64_t hash) {
  if (!std::filesystem::exists(stamp)) return false;
  return read_file(stamp).find("hash\t" + hex_hash(hash) + "\n") != std::string::npos;
}

void run_stage(Stage stage, const RunConfig& config, std::uint64_t seed, const RunLayout& layout) {
  switch (stage) {
    case Stage::Ingest: return run_ingest(config, seed, layout);
    case Stage::TrainKge: return run_train_kge(config, seed, layout);
    case Stage::TrainPolicy: return run_train_policy(config, seed, layout);
    case Stage::Recommend: return run_recommend(config, seed, layout);
    case Stage::Evaluate: return run_evaluate(config, seed, layout);
  }
}

}  // namespace

std::filesystem::path RunLayout::stamp(Stage s) const {
  return dir / (std::string(stage_name(s)) + ".stamp");
}

std::filesystem::path RunLayout::failed(Stage s) const {
  return dir / (std::string(stage_name(s)) + ".failed");
}

RunLayout run_layout(const RunConfig& config, int run) {
  return {config.out / ("run-" + std::to_string(run))};
}

LoadedData load_data(const std::filesystem::path& data_dir, const BuildOptions& options) {
  LoadedData d;
  d.data = read_dataset(data_dir);
  d.graph = build_graph(to_graph_input(d.data), options);
  d.valid = held_out_sets(d.graph, d.data.split.valid);
  d.test = held_out_sets(d.graph, d.data.split.test);
  return d;
}

Model parse_model(std::string_view name) {
  for (Model m : kModels) {
    if (model_name(m) == name) return m;
  }
  throw ConfigError("unknown model '" + std::string(name) +
                    "' (expected ekar, ekar-star, itemknn or kge-rec)");
}

std::string_view model_name(Model model) {
  switch (model) {
    case Model::Ekar: return "ekar";
    case Model::EkarStar: return "ekar-star";
    case Model::ItemKnn: return "itemknn";
    case Model::KgeRec: return "kge-rec";
  }
  return "?";
}

std::vector<RecommendationList> model_lists(Model model, const LoadedData& d,
                                            const ScoreModel& score_model,
                                            const PolicyParams* policy,
                                            const ActionSampler* actions,
                                            const RecommendOptions& options) {
  const bool path_based = model == Model::Ekar || model == Model::EkarStar;
  if (path_based && (!policy || !actions)) {
    throw std::invalid_argument("model_lists: path-based model without a policy");
  }
  RecommendOptions ro = options;
  ro.strategy = model == Model::EkarStar ? RankStrategy::Reward : RankStrategy::PathProb;
  const std::optional<ItemKnn> knn =
      model == Model::ItemKnn ? std::optional<ItemKnn>(std::in_place, d.graph) : std::nullopt;

  std::vector<RecommendationList> lists;
  for (const auto& [user, items] : d.test) {
    const auto exclusions = exclusion_set(d.graph, user, &d.valid);
    if (path_based) {
      lists.push_back(recommend(*policy, *actions, score_model, user, ro, exclusions));
      continue;
    }
    RecommendationList list{user, {}, false};
    const std::vector<EntityId> ranked =
        knn ? knn->recommend(user, options.k, exclusions)
            : kge_rec_recommend(d.graph, score_model, user, options.k, exclusions);
    for (const EntityId item : ranked) {
      const double score = knn ? 0.0 : score_model.score(user, kInteract, item);
      list.entries.push_back({item, score, {}});
    }
    list.short_list = list.entries.size() < options.k;
    lists.push_back(std::move(list));
  }
  return lists;
}

void run_ingest(const RunConfig& config, std::uint64_t seed, const RunLayout& layout) {
  if (!config.data.empty()) {
    // Fixed split supplied by the user; runs differ only in training seeds.
    write_dataset(layout.data(), read_dataset(config.data));
    return;
  }
  if (config.interactions.empty() || config.triplets.empty()) {
    throw ConfigError("set either data, or interactions and triplets");
  }
  const auto events = read_interactions(config.interactions);
  const auto triplets = read_triplets(config.triplets);
  const auto matches =
      config.matches.empty() ? std::vector<ItemMatch>{} : read_matches(config.matches);
  write_dataset(layout.data(), prepare_dataset(events, triplets, matches, seed));
}

void run_train_kge(const RunConfig& config, std::uint64_t seed, const RunLayout& layout) {
  const LoadedData d = load_data(layout.data(), build_options(config));
  KgeTrainReport report;
  const ScoreModel model = train_kge(d.graph, kge_config(config, seed), &report);
  save_embeddings(model.table(), layout.kge());
  std::ostringstream loss;
  loss << "epoch\tloss\n";
  for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) {
    loss << e + 1 << '\t' << report.epoch_loss[e] << '\n';
  }
  write_file(layout.kge_loss(), loss.str());
}

void run_train_policy(const RunConfig& config, std::uint64_t seed, const RunLayout& layout) {
  const LoadedData d = load_data(layout.data(), build_options(config));
  const ScoreModel model = load_score_model(layout.kge(), d.graph);
  const PolicyTrainResult result = train_policy(d.graph, model, policy_config(config, seed), &d.valid);
  save_policy(result.policy, layout.policy());
  write_reward_curve(layout.reward_curve(), result.curve);
  std::ostringstream v;
  v << "epoch\tmean_reward\tvalid_hr\n";
  for (std::size_t e = 0; e < result.epoch_reward.size(); ++e) {
    v << e + 1 << '\t' << result.epoch_reward[e] << '\t';
    if (e < result.valid_hr.size()) v << result.valid_hr[e];
    v << '\n';
  }
  write_file(layout.valid_hr(), v.str());
}

void run_recommend(const RunConfig& config, std::uint64_t seed, const RunLayout& layout) {
  const LoadedData d = load_data(layout.data(), build_options(config));
  const ScoreModel model = load_score_model(layout.kge(), d.graph);
  const PolicyParams policy = load_policy(layout.policy());
  const ActionSampler actions(d.graph, config.max_fanout, sampler_seed(seed));
  const RecommendOptions options = recommend_options(config);
  std::vector<RecommendationList> lists;
  for (const EntityId user : d.graph.users()) {
    if (d.graph.training_items(user).empty()) continue;
    lists.push_back(
        recommend(policy, actions, model, user, options, exclusion_set(d.graph, user, &d.valid)));
  }
  write_jsonl(layout.recommendations(), d.graph, lists);
}

void run_evaluate(const RunConfig& config, std::uint64_t seed, const RunLayout& layout) {
  const LoadedData d = load_data(layout.data(), build_options(config));
  const ScoreModel model = load_score_model(layout.kge(), d.graph);
  const PolicyParams policy = load_policy(layout.policy());
  const ActionSampler actions(d.graph, config.max_fanout, sampler_seed(seed));
  const RecommendOptions options = recommend_options(config);
  std::vector<MetricReport> reports;
  for (Model m : kModels) {
    const auto lists = model_lists(m, d, model, &policy, &actions, options);
    reports.push_back({std::string(model_name(m)), config.k,
                       {{seed, evaluate_lists(lists, d.test, config.k)}}});
  }
  write_metric_report(layout.metrics(), reports);
  write_patterns(layout.patterns(),
                 path_pattern_stats(d.graph, read_jsonl(layout.recommendations(), d.graph)));
}

std::vector<StageOutcome> run_pipeline(const RunConfig& config, const Logger& log) {
  if (auto errors = check_config(config); !errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  std::filesystem::create_directories(config.out);
  write_file(config.out / "config.txt", to_text(config));

  std::vector<StageOutcome> outcomes;
  for (int run = 0; run < config.runs; ++run) {
    const std::uint64_t seed = run_seed(config, run);
    const RunLayout layout = run_layout(config, run);
    std::filesystem::create_directories(layout.dir);
    // Once a stage re-executes, everything after it does too.
    bool dirty = false;
    for (Stage stage : kStages) {
      const std::uint64_t hash = stage_hash(config, stage, seed);
      const std::string label =
          "run " + std::to_string(run) + " (seed " + std::to_string(seed) + "): " +
          std::string(stage_name(stage));
      if (!dirty && stamp_matches(layout.stamp(stage), hash) &&
          !std::filesystem::exists(layout.failed(stage))) {
        say(label + " up to date");
        outcomes.push_back({run, stage, false});
        continue;
      }
      say(label);
      std::filesystem::remove(layout.stamp(stage));
      std::filesystem::remove(layout.failed(stage));
      try {
        run_stage(stage, config, seed, layout);
      } catch (const std::exception& e) {
        write_file(layout.failed(stage), std::string(e.what()) + "\n");
        throw;
      }
      write_file(layout.stamp(stage), stamp_text(stage, hash, seed, config));
      dirty = true;
      outcomes.push_back({run, stage, true});
    }
  }

  write_metric_report(config.out / "metrics.tsv", aggregate_metrics(config));

  // Pattern shares averaged over runs.
  std::map<std::string, double> share;
  for (int run = 0; run < config.runs; ++run) {
    std::ifstream in(run_layout(config, run).patterns());
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto tab = line.rfind('\t');
      if (tab == std::string::npos) continue;
      share[line.substr(0, tab)] += std::stod(line.substr(tab + 1)) / config.runs;
    }
  }
  PathPatternStats merged(share.begin(), share.end());
  std::stable_sort(merged.begin(), merged.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  write_patterns(config.out / "patterns.tsv", merged);
  return outcomes;
}

std::vector<MetricReport> aggregate_metrics(const RunConfig& config) {
  std::vector<MetricReport> merged;
  for (int run = 0; run < config.runs; ++run) {
    for (auto& r : read_metric_report(run_layout(config, run).metrics())) {
      auto it = std::find_if(merged.begin(), merged.end(),
                             [&](const MetricReport& m) { return m.model == r.model; });
      if (it == merged.end()) {
        merged.push_back(std::move(r));
      } else {
        it->runs.insert(it->runs.end(), r.runs.begin(), r.runs.end());
      }
    }
  }
  return merged;
}

}  // namespace pathrec
