#include "pathrec/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <utility>

#include "pathrec/inference.hpp"

namespace pathrec {
namespace {

// Inverted-dropout mask over a 2d action embedding, or nullopt when off.
std::optional<Eigen::VectorXd> input_mask(int embed_dim, double rate, Rng& rng) {
  if (rate <= 0.0) return std::nullopt;
  std::bernoulli_distribution keep(1.0 - rate);
  Eigen::VectorXd m(2 * embed_dim);
  for (Eigen::Index k = 0; k < m.size(); ++k) m[k] = keep(rng) ? 1.0 / (1.0 - rate) : 0.0;
  return m;
}

}  // namespace

double terminal_reward(const IntegratedGraph& graph, const ScoreModel* score_model, EntityId user,
                       EntityId terminal, bool shaping) {
  if (!graph.is_item(terminal)) return -1.0;
  if (graph.is_interaction(user, terminal)) return 1.0;
  if (!shaping || !score_model) return 0.0;
  return score_model->shaping_score(user, terminal);
}

Episode rollout(const PolicyParams& policy, const ActionSampler& actions, EntityId user,
                const RolloutOptions& options, Rng& rng) {
  if (options.max_len < 1) throw ConfigError("max path length must be >= 1");
  Episode ep;
  ep.trajectory.steps.push_back({kStartRelation, user});
  auto mask = input_mask(policy.embed_dim(), options.embed_dropout, rng);
  ep.tape = std::make_unique<PolicyTape>(policy, user, mask ? &*mask : nullptr);

  EntityId current = user;
  for (int t = 0; t < options.max_len; ++t) {
    std::vector<Edge> candidates = actions.sampled(current, rng);
    std::vector<char> keep = action_dropout_mask(candidates, options.action_dropout, rng);
    const Eigen::VectorXd& probs = ep.tape->score(candidates, std::move(keep));
    const std::size_t j = sample_action(probs, rng);
    const bool advance = t + 1 < options.max_len;
    if (advance) mask = input_mask(policy.embed_dim(), options.embed_dropout, rng);
    const double lp = ep.tape->commit(j, advance, advance && mask ? &*mask : nullptr);
    ep.trajectory.steps.push_back(candidates[j]);
    ep.trajectory.log_probs.push_back(lp);
    current = candidates[j].target;
  }
  return ep;
}

PolicyOptimizer::PolicyOptimizer(PolicyParams& params, const ReinforceOptions& options)
    : params_(&params),
      options_(options),
      adam_(options.adam),
      grad_(PolicyParams::zeros_like(params)) {
  if (!(options.clip_norm > 0.0)) throw ConfigError("gradient clip norm must be > 0");
}

BatchStats reinforce_update(std::span<const Episode> batch, PolicyOptimizer& opt) {
  if (batch.empty()) throw std::invalid_argument("reinforce_update: empty batch");
  const auto& o = opt.options_;
  BatchStats stats;
  for (const auto& ep : batch) stats.mean_reward += ep.trajectory.reward;
  stats.mean_reward /= static_cast<double>(batch.size());

  const double b = o.baseline && opt.baseline_ready_ ? opt.baseline_ : 0.0;
  opt.grad_.set_zero();
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const auto& ep : batch) {
    const double coeff = (ep.trajectory.reward - b) * inv_n;
    if (coeff != 0.0) ep.tape->backprop(coeff, opt.grad_, o.update_embeddings);
  }
  if (o.baseline) {
    opt.baseline_ = opt.baseline_ready_
                        ? o.baseline_decay * opt.baseline_ + (1.0 - o.baseline_decay) * stats.mean_reward
                        : stats.mean_reward;
    opt.baseline_ready_ = true;
  }

  stats.grad_norm = global_norm(opt.grad_, o.update_embeddings);
  if (!std::isfinite(stats.grad_norm)) {
    std::ostringstream msg;
    msg << "policy gradient is not finite (batch of " << batch.size() << ", mean reward "
        << stats.mean_reward << ", adam step " << opt.adam_.steps() << ")";
    throw TrainingError(msg.str());
  }
  if (stats.grad_norm == 0.0) return stats;

  // Adam minimizes; negate to ascend.
  double factor = -1.0;
  if (stats.grad_norm > o.clip_norm) factor *= o.clip_norm / stats.grad_norm;
  scale_in_place(opt.grad_, factor);

  std::vector<std::span<const double>> grads;
  std::as_const(opt.grad_).for_each_tensor(
      [&](std::string_view, std::span<const double> g) { grads.push_back(g); });
  opt.adam_.begin_step();
  std::size_t slot = 0;
  opt.params_->for_each_tensor([&](std::string_view name, std::span<double> p) {
    const std::size_t s = slot++;
    if (!o.update_embeddings && is_embedding_tensor(name)) return;
    opt.adam_.update(s, p, grads[s]);
  });
  if (!opt.params_->all_finite()) {
    throw TrainingError("policy parameters became non-finite after adam step " +
                        std::to_string(opt.adam_.steps()));
  }
  stats.updated = true;
  return stats;
}

PolicyTrainResult train_policy(const IntegratedGraph& graph, const ScoreModel& score_model,
                               const PolicyTrainConfig& config, PolicyParams initial,
                               const ItemSets* validation,
                               const std::function<void(int, double)>& on_epoch) {
  if (config.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (config.batch_size == 0) throw ConfigError("batch size must be >= 1");
  if (config.rollouts_per_user < 1) throw ConfigError("rollouts per user must be >= 1");

  PolicyTrainResult result;
  result.policy = std::move(initial);
  PolicyParams& policy = result.policy;

  const ActionSampler actions(graph, config.max_fanout, sampler_seed(config.seed));
  Rng rng(config.seed);

  ReinforceOptions ro;
  ro.adam.lr = config.lr;
  ro.clip_norm = config.clip_norm;
  ro.update_embeddings = !config.freeze_embeddings;
  ro.baseline = config.baseline;
  PolicyOptimizer optimizer(policy, ro);

  RolloutOptions rollout_options{config.max_len, config.action_dropout, config.embed_dropout};

  std::vector<EntityId> schedule;
  for (const EntityId u : graph.users()) {
    if (graph.training_items(u).empty()) continue;
    for (int r = 0; r < config.rollouts_per_user; ++r) schedule.push_back(u);
  }

  const bool validate = validation && !validation->empty();
  RecommendOptions rec;
  rec.max_len = config.max_len;
  rec.beam_width = config.valid_beam;
  rec.k = config.valid_k;
  auto validation_hr = [&]() {
    std::vector<RecommendationList> lists;
    for (const auto& [user, items] : *validation) {
      lists.push_back(recommend(policy, actions, score_model, user, rec,
                                exclusion_set(graph, user)));
    }
    return evaluate_lists(lists, *validation, config.valid_k).hr;
  };
  double best_hr = -1.0;
  PolicyParams best;

  const auto start = std::chrono::steady_clock::now();
  std::size_t step = 0;
  std::vector<Episode> batch;
  for (int epoch = 0; epoch < config.epochs && !schedule.empty(); ++epoch) {
    std::shuffle(schedule.begin(), schedule.end(), rng);
    double reward_sum = 0.0;
    for (std::size_t begin = 0; begin < schedule.size(); begin += config.batch_size) {
      const std::size_t end = std::min(schedule.size(), begin + config.batch_size);
      batch.clear();
      for (std::size_t n = begin; n < end; ++n) {
        Episode ep = rollout(policy, actions, schedule[n], rollout_options, rng);
        ep.trajectory.reward = terminal_reward(graph, &score_model, schedule[n],
                                               ep.trajectory.terminal(), config.reward_shaping);
        reward_sum += ep.trajectory.reward;
        batch.push_back(std::move(ep));
      }
      const BatchStats stats = reinforce_update(batch, optimizer);
      const double minutes =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;
      result.curve.push_back({++step, minutes, stats.mean_reward});
    }
    const double epoch_mean = reward_sum / static_cast<double>(schedule.size());
    result.epoch_reward.push_back(epoch_mean);
    if (on_epoch) on_epoch(epoch, epoch_mean);

    if (validate) {
      const double hr = validation_hr();
      result.valid_hr.push_back(hr);
      if (hr > best_hr) {
        best_hr = hr;
        best = policy;
        result.best_epoch = epoch;
      }
    }
  }
  if (validate && result.best_epoch >= 0) result.policy = std::move(best);
  return result;
}

PolicyTrainResult train_policy(const IntegratedGraph& graph, const ScoreModel& score_model,
                               const PolicyTrainConfig& config, const ItemSets* validation,
                               const std::function<void(int, double)>& on_epoch) {
  Rng init_rng(config.seed ^ 0x3C3C3C3CULL);
  return train_policy(graph, score_model, config,
                      PolicyParams::initialize(score_model.table(), config.hidden, init_rng),
                      validation, on_epoch);
}

void write_reward_curve(std::ostream& out, std::span<const CurvePoint> curve) {
  out << "step\tminutes\tmean_reward\n";
  for (const auto& p : curve) out << p.step << '\t' << p.minutes << '\t' << p.mean_reward << '\n';
}

void write_reward_curve(const std::filesystem::path& path, std::span<const CurvePoint> curve) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_reward_curve(out, curve);
}

}  // namespace pathrec
