// Command-line front end: one subcommand per pipeline stage plus the
// pipeline itself. Exit codes: 0 ok, 1 usage/config, 2 data, 3 training.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "pathrec/config.hpp"
#include "pathrec/inference.hpp"
#include "pathrec/ingest.hpp"
#include "pathrec/metrics.hpp"
#include "pathrec/pipeline.hpp"
#include "pathrec/policy.hpp"
#include "pathrec/synthetic.hpp"
#include "pathrec/trainer.hpp"

namespace fs = std::filesystem;
using namespace pathrec;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kTraining = 3 };

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Args {
  std::string config_file;
  std::vector<Setting> overrides;
  // Artifact paths that are not part of RunConfig.
  std::string data, kge, policy, out, curve, dir, user, model = "ekar", format = "jsonl",
                                                  patterns;
  int run = 0;
};

// Defaults < base file (a pipeline's config.txt) < --config < PATHREC_* < flags.
RunConfig resolve(const Args& a, const fs::path& base = {}) {
  RunConfig c;
  std::vector<std::string> errors;
  auto load = [&](const fs::path& p) {
    for (auto& e : apply_settings(c, parse_settings(slurp(p)))) errors.push_back(p.string() + ": " + e);
  };
  if (!base.empty() && fs::exists(base)) load(base);
  if (!a.config_file.empty()) load(a.config_file);
  for (auto& e : apply_settings(c, env_settings())) errors.push_back("environment: " + e);
  for (auto& e : apply_settings(c, a.overrides)) errors.push_back("command line: " + e);
  for (auto& e : check_config(c)) errors.push_back(e);
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return c;
}

ScoreModel load_model_for(const fs::path& path, const IntegratedGraph& graph) {
  EmbeddingTable t = load_embeddings(path);
  if (static_cast<std::size_t>(t.entities.rows()) != graph.num_entities()) {
    throw DataError(path.string() + " was trained on a different graph");
  }
  return ScoreModel(std::move(t));
}

void print_stats(const DatasetStats& s) {
  std::printf("users\t%zu\nitems\t%zu\nevents\t%zu\nsparsity\t%.6f\nentities\t%zu\n"
              "relations\t%zu\ntriplets\t%zu\n",
              s.users, s.items, s.events, s.sparsity, s.entities, s.relations, s.triplets);
}

int cmd_ingest(const Args& a) {
  const RunConfig c = resolve(a);
  if (c.interactions.empty() || c.triplets.empty()) {
    throw ConfigError("ingest needs --interactions and --triplets");
  }
  const auto matches = c.matches.empty() ? std::vector<ItemMatch>{} : read_matches(c.matches);
  const PreparedDataset d =
      prepare_dataset(read_interactions(c.interactions), read_triplets(c.triplets), matches, c.seed);
  write_dataset(a.out, d);
  print_stats(d.stats);
  if (d.duplicate_events || d.unmatched.removed_events) {
    std::fprintf(stderr, "collapsed %zu duplicate events; removed %zu events on unmatched items "
                 "(%zu users dropped)\n",
                 d.duplicate_events, d.unmatched.removed_events, d.unmatched.dropped_users);
  }
  return kOk;
}

int cmd_train_kge(const Args& a) {
  const RunConfig c = resolve(a);
  const LoadedData d = load_data(a.data, build_options(c));
  KgeTrainReport report;
  const ScoreModel m = train_kge(d.graph, kge_config(c, c.seed), &report);
  save_embeddings(m.table(), a.out);
  if (!report.epoch_loss.empty()) {
    std::fprintf(stderr, "final epoch loss %.6f\n", report.epoch_loss.back());
  }
  return kOk;
}

int cmd_train_policy(const Args& a) {
  const RunConfig c = resolve(a);
  const LoadedData d = load_data(a.data, build_options(c));
  const ScoreModel m = load_model_for(a.kge, d.graph);
  const auto result = train_policy(d.graph, m, policy_config(c, c.seed), &d.valid,
                                   [](int epoch, double reward) {
                                     std::fprintf(stderr, "epoch %d mean reward %.4f\n", epoch + 1,
                                                  reward);
                                   });
  save_policy(result.policy, a.out);
  if (!a.curve.empty()) write_reward_curve(a.curve, result.curve);
  if (result.best_epoch >= 0) {
    std::fprintf(stderr, "kept epoch %d (validation HR@%llu %.4f)\n", result.best_epoch + 1,
                 static_cast<unsigned long long>(c.k), result.valid_hr[result.best_epoch]);
  }
  return kOk;
}

std::vector<RecommendationList> recommend_users(const RunConfig& c, const LoadedData& d,
                                                const ScoreModel& m, const PolicyParams& policy,
                                                const std::string& only_user) {
  const ActionSampler actions(d.graph, c.max_fanout, sampler_seed(c.seed));
  std::vector<EntityId> users;
  if (!only_user.empty()) {
    const auto u = d.graph.find(EntityKind::User, only_user);
    if (!u) throw DataError("unknown user '" + only_user + "'");
    users.push_back(*u);
  } else {
    for (const EntityId u : d.graph.users()) {
      if (!d.graph.training_items(u).empty()) users.push_back(u);
    }
  }
  std::vector<RecommendationList> lists;
  for (const EntityId u : users) {
    lists.push_back(recommend(policy, actions, m, u, recommend_options(c),
                              exclusion_set(d.graph, u, &d.valid)));
  }
  return lists;
}

int cmd_recommend(const Args& a) {
  const RunConfig c = resolve(a);
  const LoadedData d = load_data(a.data, build_options(c));
  const ScoreModel m = load_model_for(a.kge, d.graph);
  const auto lists = recommend_users(c, d, m, load_policy(a.policy), a.user);
  const bool report = a.format == "report";
  if (a.out.empty() || a.out == "-") {
    report ? write_report(std::cout, d.graph, lists) : write_jsonl(std::cout, d.graph, lists);
  } else if (report) {
    std::ofstream out(a.out);
    write_report(out, d.graph, lists);
  } else {
    write_jsonl(a.out, d.graph, lists);
  }
  return kOk;
}

int cmd_evaluate(const Args& a) {
  const fs::path root = a.dir.empty() ? fs::path("runs") : fs::path(a.dir);
  const RunConfig c = resolve(a, root / "config.txt");
  const Model model = parse_model(a.model);
  MetricReport report{std::string(model_name(model)), c.k, {}};
  PathPatternStats patterns;
  for (int run = 0; run < c.runs; ++run) {
    RunConfig rc = c;
    rc.out = root;
    const RunLayout layout = run_layout(rc, run);
    const std::uint64_t seed = run_seed(c, run);
    const LoadedData d = load_data(layout.data(), build_options(c));
    const ScoreModel m = load_model_for(layout.kge(), d.graph);
    const PolicyParams policy = load_policy(layout.policy());
    const ActionSampler actions(d.graph, c.max_fanout, sampler_seed(seed));
    const auto lists = model_lists(model, d, m, &policy, &actions, recommend_options(c));
    report.runs.push_back({seed, evaluate_lists(lists, d.test, c.k)});
    if (model == Model::Ekar || model == Model::EkarStar) {
      // Share of each pattern averaged over runs.
      for (const auto& [sig, pct] : path_pattern_stats(d.graph, lists)) {
        auto it = std::find_if(patterns.begin(), patterns.end(),
                               [&](const auto& p) { return p.first == sig; });
        if (it == patterns.end()) it = patterns.insert(patterns.end(), {sig, 0.0});
        it->second += pct / c.runs;
      }
    }
  }
  std::stable_sort(patterns.begin(), patterns.end(),
                   [](const auto& x, const auto& y) { return x.second > y.second; });
  const std::vector<MetricReport> reports{report};
  if (a.out.empty() || a.out == "-") {
    write_metric_report(std::cout, reports);
  } else {
    write_metric_report(a.out, reports);
  }
  if (!a.patterns.empty()) {
    write_patterns(a.patterns, patterns);
  } else if (!patterns.empty()) {
    std::cout << '\n';
    write_patterns(std::cout, patterns);
  }
  return kOk;
}

int cmd_explain(const Args& a) {
  const fs::path root = a.dir.empty() ? fs::path("runs") : fs::path(a.dir);
  RunConfig c = resolve(a, root / "config.txt");
  c.out = root;
  const RunLayout layout = run_layout(c, a.run);
  c.seed = run_seed(c, a.run);
  const LoadedData d = load_data(layout.data(), build_options(c));
  const ScoreModel m = load_model_for(layout.kge(), d.graph);
  const auto lists = recommend_users(c, d, m, load_policy(layout.policy()), a.user);
  write_report(std::cout, d.graph, lists);
  const auto& test = d.test;
  if (const auto it = test.find(lists.front().user); it != test.end()) {
    std::cout << "held-out:";
    for (const EntityId i : it->second) std::cout << ' ' << d.graph.label(i);
    std::cout << '\n';
  }
  return kOk;
}

int cmd_pipeline(const Args& a) {
  const RunConfig c = resolve(a);
  const auto outcomes = run_pipeline(c, [](const std::string& s) {
    std::fprintf(stderr, "%s\n", s.c_str());
  });
  std::size_t executed = 0;
  for (const auto& o : outcomes) executed += o.executed;
  std::fprintf(stderr, "%zu of %zu stages executed; config %s\n", executed, outcomes.size(),
               hex_hash(config_hash(c)).c_str());
  std::ifstream metrics(c.out / "metrics.tsv");
  std::cout << metrics.rdbuf();
  return kOk;
}

int cmd_synth(const Args& a) {
  const RunConfig c = resolve(a);
  PlantedConfig pc;
  pc.seed = c.seed;
  const PlantedFixture f = planted_fixture(pc);
  PreparedDataset d;
  d.split.train = f.input.train;
  d.split.test = f.test;
  d.triplets = f.input.triplets;
  std::vector<Interaction> all = d.split.train;
  all.insert(all.end(), d.split.test.begin(), d.split.test.end());
  d.stats = compute_stats(all, d.triplets);
  write_dataset(a.out, d);

  // Settings that learn this fixture quickly.
  const KgeConfig k = planted_kge_config(c.seed);
  const PolicyTrainConfig p = planted_policy_config(c.seed);
  std::ofstream conf(fs::path(a.out) / "planted.conf");
  conf << "# planted-pattern fixture\n"
       << "data = " << fs::absolute(a.out).string() << "\n"
       << "kge_epochs = " << k.epochs << "\nkge_lr = " << k.lr << "\nkge_batch = " << k.batch_size
       << "\npolicy_epochs = " << p.epochs << "\nbatch = " << p.batch_size
       << "\npolicy_lr = " << p.lr << "\nrollouts_per_user = " << p.rollouts_per_user
       << "\nembed_dropout = " << p.embed_dropout << "\n";
  print_stats(d.stats);
  return kOk;
}

// Flags that map onto RunConfig keys.
struct KeyFlags {
  CLI::App* app;
  Args* args;

  void value(const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option_function<std::string>(
        flag, [this, key](const std::string& v) { args->overrides.push_back({key, v, 0}); }, help);
  }
  void toggle(const std::string& flag, const std::string& key, const std::string& help) {
    app->add_flag_callback(
        flag, [this, key] { args->overrides.push_back({key, "true", 0}); }, help);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Path-based explainable recommendation over a user-item-entity graph."};
  app.require_subcommand(1);
  Args a;
  app.add_option("--config", a.config_file, "flat key = value config file")
      ->check(CLI::ExistingFile);
  app.fallthrough();

  auto kge_flags = [&](KeyFlags f) {
    f.value("--dim", "dim", "embedding size");
    f.value("--negatives", "negatives", "corruptions per positive triplet");
    f.value("--kge-lr", "kge_lr", "KGE learning rate");
    f.value("--kge-batch", "kge_batch", "KGE batch size");
    f.toggle("--no-kg", "no_kg", "drop KG edges from the graph");
  };
  auto policy_flags = [&](KeyFlags f) {
    f.value("--hidden", "hidden", "LSTM hidden size");
    f.value("--max-len", "max_len", "path length T");
    f.value("--action-dropout", "action_dropout", "action dropout rate");
    f.value("--embed-dropout", "embed_dropout", "embedding dropout rate");
    f.value("--rollouts", "rollouts_per_user", "rollouts per user per epoch");
    f.value("--max-fanout", "max_fanout", "action-set cap per vertex");
    f.toggle("--no-reward-shaping", "no_reward_shaping", "reward 0 for unobserved items");
    f.toggle("--no-action-dropout", "no_action_dropout", "disable action dropout");
    f.toggle("--freeze-embeddings", "freeze_embeddings", "keep KGE embeddings fixed");
    f.toggle("--baseline", "baseline", "subtract a moving-average reward baseline");
  };
  auto rec_flags = [&](KeyFlags f) {
    f.value("--k", "k", "list length");
    f.value("--beam", "beam", "beam width");
    f.value("--strategy", "strategy", "path or reward");
  };

  auto* ingest = app.add_subcommand("ingest", "filter, match and split raw data");
  {
    KeyFlags f{ingest, &a};
    f.value("--interactions", "interactions", "user<TAB>item TSV");
    f.value("--triplets", "triplets", "head<TAB>relation<TAB>tail TSV");
    f.value("--matches", "matches", "item<TAB>entity TSV (default: identity)");
    f.value("--seed", "seed", "split seed");
    ingest->add_option("--out", a.out, "output directory")->required();
  }

  auto* train_kge_cmd = app.add_subcommand("train-kge", "train the DistMult score model");
  {
    KeyFlags f{train_kge_cmd, &a};
    kge_flags(f);
    f.value("--epochs", "kge_epochs", "epochs");
    f.value("--lr", "kge_lr", "learning rate");
    f.value("--dropout", "kge_dropout", "head-embedding dropout");
    f.value("--seed", "seed", "seed");
    train_kge_cmd->add_option("--data", a.data, "prepared dataset directory")->required();
    train_kge_cmd->add_option("--out", a.out, "checkpoint path")->default_val("kge.bin");
  }

  auto* train_policy_cmd = app.add_subcommand("train-policy", "train the path policy");
  {
    KeyFlags f{train_policy_cmd, &a};
    policy_flags(f);
    f.toggle("--no-kg", "no_kg", "drop KG edges from the graph");
    f.value("--epochs", "policy_epochs", "epochs");
    f.value("--batch", "batch", "trajectories per update");
    f.value("--lr", "policy_lr", "learning rate");
    f.value("--seed", "seed", "seed");
    f.value("--k", "k", "validation list length");
    f.value("--beam", "beam", "validation beam width");
    train_policy_cmd->add_option("--data", a.data, "prepared dataset directory")->required();
    train_policy_cmd->add_option("--kge", a.kge, "score-model checkpoint")->required();
    train_policy_cmd->add_option("--out", a.out, "checkpoint path")->default_val("policy.bin");
    train_policy_cmd->add_option("--curve", a.curve, "reward-curve TSV");
  }

  auto* recommend_cmd = app.add_subcommand("recommend", "top-k lists with explanation paths");
  {
    KeyFlags f{recommend_cmd, &a};
    rec_flags(f);
    f.value("--max-len", "max_len", "path length T");
    f.value("--max-fanout", "max_fanout", "action-set cap per vertex");
    f.value("--seed", "seed", "seed the policy was trained with");
    f.toggle("--no-kg", "no_kg", "drop KG edges from the graph");
    recommend_cmd->add_option("--data", a.data, "prepared dataset directory")->required();
    recommend_cmd->add_option("--kge", a.kge, "score-model checkpoint")->required();
    recommend_cmd->add_option("--policy", a.policy, "policy checkpoint")->required();
    recommend_cmd->add_option("--out", a.out, "output path (default stdout)");
    recommend_cmd->add_option("--format", a.format, "jsonl or report")
        ->check(CLI::IsMember({"jsonl", "report"}));
    recommend_cmd->add_option("--user", a.user, "only this user");
  }

  auto* evaluate_cmd = app.add_subcommand("evaluate", "HR@k and NDCG@k over pipeline runs");
  {
    KeyFlags f{evaluate_cmd, &a};
    f.value("--k", "k", "cutoff");
    f.value("--runs", "runs", "number of runs to read");
    f.value("--beam", "beam", "beam width");
    evaluate_cmd->add_option("--dir", a.dir, "pipeline output directory")->default_val("runs");
    evaluate_cmd->add_option("--model", a.model, "ekar, ekar-star, itemknn or kge-rec")
        ->check(CLI::IsMember({"ekar", "ekar-star", "itemknn", "kge-rec"}));
    evaluate_cmd->add_option("--out", a.out, "metric TSV (default stdout)");
    evaluate_cmd->add_option("--patterns", a.patterns, "path-pattern TSV");
  }

  auto* explain_cmd = app.add_subcommand("explain", "print one user's recommendation paths");
  {
    KeyFlags f{explain_cmd, &a};
    rec_flags(f);
    explain_cmd->add_option("--dir", a.dir, "pipeline output directory")->default_val("runs");
    explain_cmd->add_option("--run", a.run, "run index")->default_val(0);
    explain_cmd->add_option("--user", a.user, "user label")->required();
  }

  auto* pipeline_cmd = app.add_subcommand("pipeline", "ingest through evaluate, all runs");
  {
    KeyFlags f{pipeline_cmd, &a};
    kge_flags(f);
    policy_flags(f);
    rec_flags(f);
    f.value("--interactions", "interactions", "user<TAB>item TSV");
    f.value("--triplets", "triplets", "head<TAB>relation<TAB>tail TSV");
    f.value("--matches", "matches", "item<TAB>entity TSV");
    f.value("--data", "data", "prepared dataset directory (skips splitting)");
    f.value("--out", "out", "output directory");
    f.value("--kge-epochs", "kge_epochs", "KGE epochs");
    f.value("--epochs", "policy_epochs", "policy epochs");
    f.value("--batch", "batch", "policy batch size");
    f.value("--lr", "policy_lr", "policy learning rate");
    f.value("--runs", "runs", "number of seeded runs");
    f.value("--seed", "seed", "master seed; run k uses seed + k");
  }

  auto* synth_cmd = app.add_subcommand("synth", "write the planted-pattern fixture");
  {
    KeyFlags f{synth_cmd, &a};
    f.value("--seed", "seed", "fixture seed");
    synth_cmd->add_option("--out", a.out, "output directory")->required();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*ingest) return cmd_ingest(a);
    if (*train_kge_cmd) return cmd_train_kge(a);
    if (*train_policy_cmd) return cmd_train_policy(a);
    if (*recommend_cmd) return cmd_recommend(a);
    if (*evaluate_cmd) return cmd_evaluate(a);
    if (*explain_cmd) return cmd_explain(a);
    if (*pipeline_cmd) return cmd_pipeline(a);
    if (*synth_cmd) return cmd_synth(a);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kData;
  } catch (const TrainingError& e) {
    std::fprintf(stderr, "training failed: %s\n", e.what());
    return kTraining;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kTraining;
  }
  return kUsage;
}
