#include "pathrec/kge.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pathrec/adam.hpp"
#include "binary_io.hpp"

namespace pathrec {
namespace {

constexpr char kKgeMagic[5] = "PKGE";
constexpr std::uint32_t kKgeVersion = 1;

// log(1 + exp(x)) without overflow.
double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

bool EmbeddingTable::all_finite() const {
  return entities.allFinite() && relations.allFinite();
}

EmbeddingTable EmbeddingTable::uniform(std::size_t num_entities, std::size_t num_relations,
                                       int dim, Rng& rng) {
  if (dim < 1) throw ConfigError("embedding dimension must be >= 1");
  const double bound = 0.5 / dim;
  std::uniform_real_distribution<double> dist(-bound, bound);
  EmbeddingTable t;
  t.entities.resize(static_cast<Eigen::Index>(num_entities), dim);
  t.relations.resize(static_cast<Eigen::Index>(num_relations), dim);
  for (Eigen::Index i = 0; i < t.entities.size(); ++i) t.entities.data()[i] = dist(rng);
  for (Eigen::Index i = 0; i < t.relations.size(); ++i) t.relations.data()[i] = dist(rng);
  return t;
}

double distmult_score(std::span<const double> head, std::span<const double> relation,
                      std::span<const double> tail) {
  double s = 0.0;
  for (std::size_t k = 0; k < head.size(); ++k) s += head[k] * relation[k] * tail[k];
  return s;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

ScoreModel::ScoreModel(EmbeddingTable table, ScoreVariant variant)
    : table_(std::move(table)), variant_(variant) {
  if (variant == ScoreVariant::ConvE) {
    throw ConfigError("score model 'conve' is not implemented; use 'distmult'");
  }
  if (table_.entities.cols() != table_.relations.cols()) {
    throw ConfigError("entity and relation embeddings differ in width");
  }
}

double ScoreModel::score(EntityId head, RelationId relation, EntityId tail) const {
  return distmult_score(table_.entity(head), table_.relation(relation), table_.entity(tail));
}

double ScoreModel::shaping_score(EntityId user, EntityId item) const {
  return sigmoid(score(user, kInteract, item));
}

double bce_term(const Eigen::VectorXd& head, const Eigen::VectorXd& relation,
                const Eigen::VectorXd& tail, bool positive, DistMultGrad* grad) {
  const double s = (head.array() * relation.array() * tail.array()).sum();
  const double loss = positive ? softplus(-s) : softplus(s);
  if (grad) {
    const double dl_ds = positive ? sigmoid(s) - 1.0 : sigmoid(s);
    grad->head = dl_ds * (relation.array() * tail.array()).matrix();
    grad->relation = dl_ds * (head.array() * tail.array()).matrix();
    grad->tail = dl_ds * (head.array() * relation.array()).matrix();
  }
  return loss;
}

std::vector<Triplet> kge_training_triplets(const IntegratedGraph& graph,
                                           bool include_interactions) {
  std::vector<Triplet> out;
  for (std::uint32_t v = 0; v < graph.num_entities(); ++v) {
    for (const Edge& e : graph.neighbors(EntityId{v})) {
      if (e.relation == kSelfLoop) continue;
      if (!include_interactions && (e.relation == kInteract || e.relation == kInteractedBy)) {
        continue;
      }
      out.push_back({EntityId{v}, e.relation, e.target});
    }
  }
  return out;
}

void train_kge_table(const IntegratedGraph& graph, const KgeConfig& config,
                     EmbeddingTable& table, KgeTrainReport* report) {
  if (config.negatives < 0) throw ConfigError("negatives must be >= 0");
  if (config.batch_size == 0) throw ConfigError("kge batch size must be >= 1");
  if (config.dropout < 0.0 || config.dropout >= 1.0) {
    throw ConfigError("kge dropout must lie in [0, 1)");
  }
  const int d = table.dim();
  auto positives = kge_training_triplets(graph, config.include_interactions);
  if (positives.empty() || config.epochs <= 0) return;

  std::vector<EntityId> by_kind[3];
  for (auto kind : {EntityKind::User, EntityKind::Item, EntityKind::Attribute}) {
    by_kind[static_cast<int>(kind)] = graph.entities_of_kind(kind);
  }

  Rng rng(config.seed);
  Adam adam(AdamOptions{config.lr});
  RowMatrix entity_grad = RowMatrix::Zero(table.entities.rows(), d);
  RowMatrix relation_grad = RowMatrix::Zero(table.relations.rows(), d);
  std::bernoulli_distribution keep(1.0 - config.dropout);
  std::bernoulli_distribution corrupt_head(0.5);
  const double keep_scale = 1.0 / (1.0 - config.dropout);

  Eigen::VectorXd head(d), rel(d), tail(d), mask(d);
  DistMultGrad g;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(positives.begin(), positives.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < positives.size(); begin += config.batch_size) {
      const std::size_t end = std::min(positives.size(), begin + config.batch_size);
      const double scale = 1.0 / static_cast<double>(end - begin);
      entity_grad.setZero();
      relation_grad.setZero();
      double batch_loss = 0.0;

      for (std::size_t p = begin; p < end; ++p) {
        const Triplet& pos = positives[p];
        if (config.dropout > 0.0) {
          for (int k = 0; k < d; ++k) mask[k] = keep(rng) ? keep_scale : 0.0;
        } else {
          mask.setOnes();
        }

        auto accumulate = [&](const Triplet& t, bool positive) {
          head = table.entities.row(t.head.index).transpose().cwiseProduct(mask);
          rel = table.relations.row(t.relation.index).transpose();
          tail = table.entities.row(t.tail.index).transpose();
          batch_loss += bce_term(head, rel, tail, positive, &g);
          entity_grad.row(t.head.index) += scale * g.head.cwiseProduct(mask).transpose();
          relation_grad.row(t.relation.index) += scale * g.relation.transpose();
          entity_grad.row(t.tail.index) += scale * g.tail.transpose();
        };

        accumulate(pos, true);
        for (int n = 0; n < config.negatives; ++n) {
          Triplet neg = pos;
          const bool head_side = corrupt_head(rng);
          const EntityId slot = head_side ? pos.head : pos.tail;
          const auto& pool = by_kind[static_cast<int>(graph.kind(slot))];
          std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
          (head_side ? neg.head : neg.tail) = pool[pick(rng)];
          accumulate(neg, false);
        }
      }

      if (!std::isfinite(batch_loss) || !entity_grad.allFinite() || !relation_grad.allFinite()) {
        std::ostringstream msg;
        msg << "kge training diverged at epoch " << epoch << ", batch starting at " << begin
            << " (loss " << batch_loss << ")";
        throw TrainingError(msg.str());
      }
      epoch_loss += batch_loss;

      adam.begin_step();
      adam.update(0, {table.entities.data(), static_cast<std::size_t>(table.entities.size())},
                  {entity_grad.data(), static_cast<std::size_t>(entity_grad.size())});
      adam.update(1, {table.relations.data(), static_cast<std::size_t>(table.relations.size())},
                  {relation_grad.data(), static_cast<std::size_t>(relation_grad.size())});
    }
    if (!table.all_finite()) {
      throw TrainingError("kge embeddings became non-finite at epoch " + std::to_string(epoch));
    }
    if (report) report->epoch_loss.push_back(epoch_loss / static_cast<double>(positives.size()));
  }
}

ScoreModel train_kge(const IntegratedGraph& graph, const KgeConfig& config,
                     KgeTrainReport* report) {
  Rng init_rng(config.seed ^ 0xA5A5A5A5ULL);
  EmbeddingTable table =
      EmbeddingTable::uniform(graph.num_entities(), graph.num_relations(), config.dim, init_rng);
  train_kge_table(graph, config, table, report);
  return ScoreModel(std::move(table));
}

void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  binio::put_magic(out, kKgeMagic);
  binio::put_u32(out, kKgeVersion);
  binio::put_u32(out, static_cast<std::uint32_t>(table.dim()));
  binio::put_u32(out, static_cast<std::uint32_t>(table.entities.rows()));
  binio::put_u32(out, static_cast<std::uint32_t>(table.relations.rows()));
  binio::put_f32s(out, {table.entities.data(), static_cast<std::size_t>(table.entities.size())});
  binio::put_f32s(out, {table.relations.data(), static_cast<std::size_t>(table.relations.size())});
  if (!out) throw DataError("failed writing " + path.string());
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  binio::expect_magic(in, kKgeMagic, path.string());
  if (const auto version = binio::get_u32(in); version != kKgeVersion) {
    throw DataError(path.string() + ": unsupported kge checkpoint version " +
                    std::to_string(version));
  }
  const auto d = binio::get_u32(in);
  const auto n = binio::get_u32(in);
  const auto m = binio::get_u32(in);
  EmbeddingTable t;
  t.entities.resize(n, d);
  t.relations.resize(m, d);
  binio::get_f32s(in, {t.entities.data(), static_cast<std::size_t>(t.entities.size())});
  binio::get_f32s(in, {t.relations.data(), static_cast<std::size_t>(t.relations.size())});
  return t;
}

}  // namespace pathrec
