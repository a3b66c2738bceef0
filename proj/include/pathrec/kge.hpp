#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pathrec/graph.hpp"
#include "pathrec/types.hpp"

namespace pathrec {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One row per entity / relation, both of width `dim()`.
struct EmbeddingTable {
  RowMatrix entities;
  RowMatrix relations;

  int dim() const noexcept { return static_cast<int>(entities.cols()); }
  bool all_finite() const;

  std::span<const double> entity(EntityId e) const {
    return {entities.data() + static_cast<std::ptrdiff_t>(e.index) * entities.cols(),
            static_cast<std::size_t>(entities.cols())};
  }
  std::span<const double> relation(RelationId r) const {
    return {relations.data() + static_cast<std::ptrdiff_t>(r.index) * relations.cols(),
            static_cast<std::size_t>(relations.cols())};
  }

  /// Uniform in [-0.5/dim, 0.5/dim].
  static EmbeddingTable uniform(std::size_t num_entities, std::size_t num_relations, int dim,
                                Rng& rng);
};

/// sum_k h[k] * r[k] * t[k]
double distmult_score(std::span<const double> head, std::span<const double> relation,
                      std::span<const double> tail);

double sigmoid(double x);

enum class ScoreVariant { DistMult, ConvE };

/// KGE score function psi over a frozen embedding table.
class ScoreModel {
 public:
  /// Only DistMult is implemented; ConvE raises ConfigError.
  explicit ScoreModel(EmbeddingTable table, ScoreVariant variant = ScoreVariant::DistMult);

  double score(EntityId head, RelationId relation, EntityId tail) const;
  /// sigma(psi(user, Interact, item)), strictly inside (0, 1) for finite tables.
  double shaping_score(EntityId user, EntityId item) const;

  const EmbeddingTable& table() const noexcept { return table_; }
  ScoreVariant variant() const noexcept { return variant_; }

 private:
  EmbeddingTable table_;
  ScoreVariant variant_;
};

struct KgeConfig {
  int dim = 32;
  int epochs = 50;
  int negatives = 8;
  double lr = 1e-3;
  /// Inverted dropout on the head embedding during training.
  double dropout = 0.0;
  std::size_t batch_size = 512;
  std::uint64_t seed = 1;
  /// Train on Interact / InteractedBy edges as well as KG edges.
  bool include_interactions = true;
};

struct KgeTrainReport {
  std::vector<double> epoch_loss;
};

/// Gradient of one BCE term with respect to the three vectors.
struct DistMultGrad {
  Eigen::VectorXd head;
  Eigen::VectorXd relation;
  Eigen::VectorXd tail;
};

/// -log sigma(s) for a positive triple, -log(1 - sigma(s)) for a negative
/// one, where s is the DistMult score. Fills `grad` when non-null.
double bce_term(const Eigen::VectorXd& head, const Eigen::VectorXd& relation,
                const Eigen::VectorXd& tail, bool positive, DistMultGrad* grad = nullptr);

/// Positive training triplets: every stored edge of G' except self-loops.
std::vector<Triplet> kge_training_triplets(const IntegratedGraph& graph,
                                           bool include_interactions);

/// Maximizes the likelihood of the graph's triplets with Adam and uniformly
/// sampled kind-matched corruptions. Throws TrainingError on divergence.
ScoreModel train_kge(const IntegratedGraph& graph, const KgeConfig& config,
                     KgeTrainReport* report = nullptr);

/// Continues training from an existing table (used by train_kge).
void train_kge_table(const IntegratedGraph& graph, const KgeConfig& config,
                     EmbeddingTable& table, KgeTrainReport* report = nullptr);

/// Header: "PKGE", version, dim, |V'|, |R'| (u32 LE), then entity and
/// relation rows as little-endian float32.
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);
EmbeddingTable load_embeddings(const std::filesystem::path& path);

}  // namespace pathrec
