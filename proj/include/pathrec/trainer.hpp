#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "pathrec/adam.hpp"
#include "pathrec/graph.hpp"
#include "pathrec/kge.hpp"
#include "pathrec/metrics.hpp"
#include "pathrec/policy.hpp"

namespace pathrec {

struct Trajectory {
  /// steps[0] = (Start, user); T further steps.
  std::vector<Edge> steps;
  std::vector<double> log_probs;
  double reward = 0.0;

  EntityId user() const { return steps.front().target; }
  EntityId terminal() const { return steps.back().target; }
};

/// 1 for a training item of the user, sigma(psi(u, Interact, e)) for any
/// other item (0 with shaping off or no model), -1 for non-items.
double terminal_reward(const IntegratedGraph& graph, const ScoreModel* score_model, EntityId user,
                       EntityId terminal, bool shaping = true);

struct RolloutOptions {
  int max_len = 3;
  double action_dropout = 0.0;
  double embed_dropout = 0.0;
};

/// A sampled walk plus the tape needed to differentiate its log-probability.
struct Episode {
  Trajectory trajectory;
  std::unique_ptr<PolicyTape> tape;
};

/// Samples T actions from pi starting at `user`. Action sets come from
/// actions.sampled(); dropout masks are drawn from `rng`. The reward is
/// left at 0 for the caller to fill in.
Episode rollout(const PolicyParams& policy, const ActionSampler& actions, EntityId user,
                const RolloutOptions& options, Rng& rng);

struct ReinforceOptions {
  AdamOptions adam;
  double clip_norm = 5.0;
  bool update_embeddings = true;
  /// Subtract an exponential moving average of the batch reward.
  bool baseline = false;
  double baseline_decay = 0.9;
};

struct BatchStats {
  double mean_reward = 0.0;
  double grad_norm = 0.0;  ///< before clipping
  bool updated = false;
};

/// Adam state and gradient buffer for REINFORCE on one PolicyParams.
class PolicyOptimizer {
 public:
  PolicyOptimizer(PolicyParams& params, const ReinforceOptions& options);

  PolicyParams& params() noexcept { return *params_; }
  const ReinforceOptions& options() const noexcept { return options_; }

 private:
  friend BatchStats reinforce_update(std::span<const Episode> batch, PolicyOptimizer& optimizer);

  PolicyParams* params_;
  ReinforceOptions options_;
  Adam adam_;
  PolicyParams grad_;
  double baseline_ = 0.0;
  bool baseline_ready_ = false;
};

/// One ascent step on (1/B) sum_b (R_b - baseline) sum_t log pi(a_t | s_t).
/// The gradient is clipped to options.clip_norm; an all-zero gradient
/// leaves the parameters untouched. Throws TrainingError on non-finite
/// gradients.
BatchStats reinforce_update(std::span<const Episode> batch, PolicyOptimizer& optimizer);

struct PolicyTrainConfig {
  int epochs = 30;
  std::size_t batch_size = 512;
  int max_len = 3;
  int hidden = 64;
  double lr = 1e-3;
  double action_dropout = 0.5;
  double embed_dropout = 0.1;
  double clip_norm = 5.0;
  bool reward_shaping = true;
  bool freeze_embeddings = false;
  bool baseline = false;
  std::size_t max_fanout = 512;
  /// Trajectories per user per epoch.
  int rollouts_per_user = 1;
  std::uint64_t seed = 1;
  /// Validation ranking used for checkpoint selection.
  std::size_t valid_k = 10;
  std::size_t valid_beam = 64;
};

struct CurvePoint {
  std::size_t step = 0;
  double minutes = 0.0;
  double mean_reward = 0.0;
};

struct PolicyTrainResult {
  PolicyParams policy;
  std::vector<CurvePoint> curve;
  std::vector<double> epoch_reward;
  std::vector<double> valid_hr;  ///< empty without validation data
  int best_epoch = -1;           ///< -1: initial policy or no validation
};

/// Runs REINFORCE from `initial`. With validation sets the returned policy
/// is the one with the best validation HR@valid_k (earliest on ties);
/// otherwise it is the final one. `on_epoch`, if set, sees each epoch's
/// mean reward.
PolicyTrainResult train_policy(const IntegratedGraph& graph, const ScoreModel& score_model,
                               const PolicyTrainConfig& config, PolicyParams initial,
                               const ItemSets* validation = nullptr,
                               const std::function<void(int, double)>& on_epoch = {});

/// Initializes from the score model's embeddings, then trains.
PolicyTrainResult train_policy(const IntegratedGraph& graph, const ScoreModel& score_model,
                               const PolicyTrainConfig& config,
                               const ItemSets* validation = nullptr,
                               const std::function<void(int, double)>& on_epoch = {});

/// Seed of the fixed neighbour sample used at validation and inference, so
/// both see the same action sets for a given run seed.
inline std::uint64_t sampler_seed(std::uint64_t seed) { return seed ^ 0x5EEDF00DULL; }

/// TSV: step, minutes, mean_reward.
void write_reward_curve(std::ostream& out, std::span<const CurvePoint> curve);
void write_reward_curve(const std::filesystem::path& path, std::span<const CurvePoint> curve);

}  // namespace pathrec
