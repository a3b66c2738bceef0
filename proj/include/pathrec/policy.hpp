#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "pathrec/kge.hpp"
#include "pathrec/types.hpp"

namespace pathrec {

/// Weights of pi_theta: a single LSTM cell over [relation; entity] inputs,
/// a two-layer MLP mapping the hidden state to a 2d query vector, and the
/// entity/relation embeddings shared with the action encoder.
///
/// LSTM gate rows are stacked as [input; forget; output; candidate], each
/// block `hidden` rows tall; columns are [input (2d); previous hidden (h)].
struct PolicyParams {
  RowMatrix lstm_weight;
  Eigen::VectorXd lstm_bias;
  RowMatrix w1;
  Eigen::VectorXd b1;
  RowMatrix w2;
  Eigen::VectorXd b2;
  EmbeddingTable embeddings;

  int embed_dim() const noexcept { return embeddings.dim(); }
  int hidden() const noexcept { return static_cast<int>(w1.rows()); }
  bool all_finite() const;

  /// Xavier-uniform matrices, zero biases, forget-gate bias +1, embeddings
  /// copied from `pretrained`.
  static PolicyParams initialize(const EmbeddingTable& pretrained, int hidden, Rng& rng);
  /// Same shapes as `like`, every value zero. Used for gradient buffers.
  static PolicyParams zeros_like(const PolicyParams& like);
  static PolicyParams zeros(std::size_t entities, std::size_t relations, int embed_dim,
                            int hidden);

  void set_zero();

  /// Visits every tensor in checkpoint order as (name, flat row-major data).
  template <typename F>
  void for_each_tensor(F&& f) {
    f(std::string_view("lstm_weight"), flat(lstm_weight));
    f(std::string_view("lstm_bias"), flat(lstm_bias));
    f(std::string_view("w1"), flat(w1));
    f(std::string_view("b1"), flat(b1));
    f(std::string_view("w2"), flat(w2));
    f(std::string_view("b2"), flat(b2));
    f(std::string_view("entity_embeddings"), flat(embeddings.entities));
    f(std::string_view("relation_embeddings"), flat(embeddings.relations));
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    const_cast<PolicyParams&>(*this).for_each_tensor(
        [&](std::string_view name, std::span<double> data) {
          f(name, std::span<const double>(data));
        });
  }

 private:
  template <typename M>
  static std::span<double> flat(M& m) {
    return {m.data(), static_cast<std::size_t>(m.size())};
  }
};

inline bool is_embedding_tensor(std::string_view name) {
  return name == "entity_embeddings" || name == "relation_embeddings";
}

/// LSTM (hidden, cell) pair.
struct StateEncoding {
  Eigen::VectorXd hidden;
  Eigen::VectorXd cell;

  static StateEncoding zero(int hidden_size);
};

/// [relation; entity] embedding of an action.
Eigen::VectorXd action_embedding(const EmbeddingTable& table, Edge action);

struct LstmCache {
  Eigen::VectorXd input;
  Eigen::VectorXd h_prev;
  Eigen::VectorXd c_prev;
  Eigen::VectorXd i, f, o, g;
  Eigen::VectorXd tanh_c;
};

StateEncoding lstm_step(const PolicyParams& params, const StateEncoding& prev,
                        const Eigen::VectorXd& input, LstmCache* cache = nullptr);

/// s_0 = LSTM(0, [r_0; e_user]).
StateEncoding encode_initial(const PolicyParams& params, EntityId user);
/// s_t = LSTM(s_{t-1}, [r_t; e_t]).
StateEncoding encode_step(const PolicyParams& params, const StateEncoding& prev, Edge action);

struct HeadCache {
  Eigen::VectorXd hidden;
  Eigen::VectorXd z1;
  Eigen::VectorXd a1;
};

/// y = W2 ReLU(W1 s + b1) + b2
Eigen::VectorXd policy_head(const PolicyParams& params, const Eigen::VectorXd& hidden,
                            HeadCache* cache = nullptr);

/// Softmax restricted to entries with keep[j] != 0; dropped entries get 0.
/// An empty `keep` keeps everything.
Eigen::VectorXd masked_softmax(const Eigen::VectorXd& logits, const std::vector<char>& keep = {});

enum class PolicyMode { Train, Inference };

/// Action dropout mask: every non-self-loop candidate is dropped with
/// probability `rate`; self-loops always survive. If no candidate survives
/// (only possible without a self-loop) the full set is kept.
std::vector<char> action_dropout_mask(std::span<const Edge> candidates, double rate, Rng& rng);

struct ActionDistribution {
  Eigen::VectorXd logits;
  Eigen::VectorXd probs;
  std::vector<char> keep;
};

/// pi(a | s) over `candidates`. In Train mode with rate > 0 a dropout mask is
/// drawn from `rng` and the distribution renormalized over survivors.
ActionDistribution action_distribution(const PolicyParams& params, const StateEncoding& state,
                                       std::span<const Edge> candidates, double dropout_rate,
                                       PolicyMode mode, Rng* rng = nullptr);

/// Same, with candidates given directly as 2d action embeddings.
ActionDistribution action_distribution(const PolicyParams& params, const StateEncoding& state,
                                       std::span<const Eigen::VectorXd> candidates,
                                       const std::vector<char>& keep = {});

/// Categorical draw. Zero-probability entries are never returned.
std::size_t sample_action(const Eigen::VectorXd& probs, Rng& rng);

/// Records one walk through the policy so its log-probability can be
/// differentiated afterwards. Usage: construct at the user, then alternate
/// score() and commit().
class PolicyTape {
 public:
  PolicyTape(const PolicyParams& params, EntityId user,
             const Eigen::VectorXd* input_mask = nullptr);

  /// Distribution over `candidates` at the current state. `keep` is an
  /// optional action-dropout mask.
  const Eigen::VectorXd& score(std::vector<Edge> candidates, std::vector<char> keep = {});

  /// Takes action `index` of the last scored set and returns its
  /// log-probability. With `advance`, the action is fed to the LSTM
  /// (optionally through an embedding-dropout mask).
  double commit(std::size_t index, bool advance, const Eigen::VectorXd* input_mask = nullptr);

  const StateEncoding& state() const noexcept { return state_; }
  double log_prob() const noexcept { return log_prob_; }
  std::size_t decisions() const noexcept { return decisions_.size(); }

  /// grad += coeff * d(sum_t log pi(a_t | s_t)) / d(theta). Embedding rows
  /// are skipped when `embedding_grads` is false.
  void backprop(double coeff, PolicyParams& grad, bool embedding_grads = true) const;

 private:
  struct Input {
    Edge edge;
    Eigen::VectorXd mask;
    LstmCache cache;
  };
  struct Decision {
    HeadCache head;
    Eigen::VectorXd query;
    std::vector<Edge> candidates;
    Eigen::VectorXd probs;
    std::size_t chosen = 0;
    std::size_t state_index = 0;
  };

  void feed(Edge edge, const Eigen::VectorXd* mask);

  const PolicyParams* params_;
  std::vector<Input> inputs_;
  std::vector<Decision> decisions_;
  Decision pending_;
  bool has_pending_ = false;
  StateEncoding state_;
  double log_prob_ = 0.0;
};

/// Euclidean norm over all gradient tensors (embeddings optional).
double global_norm(const PolicyParams& grad, bool include_embeddings = true);
void scale_in_place(PolicyParams& grad, double factor);

/// Header: "PPOL", version, d, h, |V'|, |R'| (u32 LE), then every tensor
/// in for_each_tensor order as little-endian float32, row-major.
void save_policy(const PolicyParams& params, const std::filesystem::path& path);
PolicyParams load_policy(const std::filesystem::path& path);

}  // namespace pathrec
