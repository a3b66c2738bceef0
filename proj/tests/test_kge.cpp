#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "support.hpp"

using namespace pathrec;
using testing::id;

namespace {

double oracle_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Eigen::VectorXd random_vector(int d, Rng& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::VectorXd v(d);
  for (int k = 0; k < d; ++k) v[k] = u(rng);
  return v;
}

double score_of(const Eigen::VectorXd& h, const Eigen::VectorXd& r, const Eigen::VectorXd& t) {
  double s = 0;
  for (Eigen::Index k = 0; k < h.size(); ++k) s += h[k] * r[k] * t[k];
  return s;
}

// Filtered rank of every true tail among entities of the tail's kind (the
// pool negatives are drawn from), averaged.
double mean_filtered_rank(const IntegratedGraph& g, const ScoreModel& m,
                          const std::vector<Triplet>& truth) {
  double total = 0;
  for (const auto& t : truth) {
    const double target = m.score(t.head, t.relation, t.tail);
    int rank = 1;
    for (std::uint32_t e = 0; e < g.num_entities(); ++e) {
      const Triplet other{t.head, t.relation, {e}};
      if (EntityId{e} == t.tail || std::count(truth.begin(), truth.end(), other)) continue;
      if (g.kind({e}) != g.kind(t.tail)) continue;
      if (m.score(t.head, t.relation, {e}) > target) ++rank;
    }
    total += rank;
  }
  return total / static_cast<double>(truth.size());
}

}  // namespace

TEST_CASE("distmult score examples") {
  const std::vector<double> ones(4, 1.0);
  CHECK(distmult_score(ones, ones, ones) == doctest::Approx(4.0));
  const std::vector<double> h = {1, 0}, r = {0, 1}, t = {1, 1};
  CHECK(distmult_score(h, r, t) == 0.0);
  const std::vector<double> h2 = {0.5, 2}, r2 = {2, 0.5}, t2 = {1, 1};
  CHECK(distmult_score(h2, r2, t2) == doctest::Approx(0.5 * 2 * 1 + 2 * 0.5 * 1));
}

TEST_CASE("property: distmult is symmetric in head and tail") {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const int d = 1 + trial % 16;
    const auto h = random_vector(d, rng), r = random_vector(d, rng), t = random_vector(d, rng);
    const std::span<const double> hs(h.data(), d), rs(r.data(), d), ts(t.data(), d);
    REQUIRE(distmult_score(hs, rs, ts) == doctest::Approx(distmult_score(ts, rs, hs)).epsilon(1e-12));
    REQUIRE(distmult_score(hs, rs, ts) == doctest::Approx(score_of(h, r, t)).epsilon(1e-12));
  }
}

TEST_CASE("sigmoid and shaping score") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(std::log(3.0)) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(sigmoid(std::log(3.0)) == doctest::Approx(oracle_sigmoid(std::log(3.0))).epsilon(1e-12));
  CHECK(sigmoid(40.0) > sigmoid(20.0));
  CHECK(sigmoid(1e6) == 1.0);
  CHECK(sigmoid(-1e6) == 0.0);
  CHECK(std::isfinite(sigmoid(-800.0)));

  // psi(u, Interact, i) = ln 3 built by hand.
  GraphInput in;
  in.train.push_back({"u", "i", 1});
  const auto g = build_graph(in);
  EmbeddingTable t;
  t.entities = RowMatrix::Zero(2, 2);
  t.relations = RowMatrix::Zero(g.num_relations(), 2);
  const auto u = id(g, EntityKind::User, "u"), i = id(g, EntityKind::Item, "i");
  t.entities(u.index, 0) = 1.0;
  t.entities(i.index, 0) = std::log(3.0);
  t.relations(kInteract.index, 0) = 1.0;
  const ScoreModel m(t);
  CHECK(m.shaping_score(u, i) == doctest::Approx(0.75));

  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    EmbeddingTable r = EmbeddingTable::uniform(2, g.num_relations(), 8, rng);
    r.entities *= 40.0;
    r.relations *= 40.0;
    const double s = ScoreModel(r).shaping_score(u, i);
    REQUIRE(s > 0.0);
    REQUIRE(s < 1.0);
  }
}

TEST_CASE("bce term matches the hand-evaluated loss") {
  Eigen::VectorXd h(2), r(2), tp(2), tn(2);
  h << 0.5, -1.0;
  r << 1.0, 2.0;
  tp << 2.0, -0.5;  // s+ = 1 + 1 = 2
  tn << 1.0, 1.0;   // s- = 0.5 - 2 = -1.5
  const double expected = -std::log(oracle_sigmoid(2.0)) - std::log(1.0 - oracle_sigmoid(-1.5));
  CHECK(bce_term(h, r, tp, true) + bce_term(h, r, tn, false) ==
        doctest::Approx(expected).epsilon(1e-12));
  // Large margins stay finite.
  Eigen::VectorXd big = Eigen::VectorXd::Constant(2, 100.0);
  CHECK(std::isfinite(bce_term(big, big, big, false)));
  CHECK(bce_term(big, big, big, true) == doctest::Approx(0.0));
}

TEST_CASE("property: bce gradients match central differences") {
  Rng rng(5);
  const double eps = 1e-6;
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + trial % 8;
    const bool positive = trial % 2 == 0;
    Eigen::VectorXd v[3] = {random_vector(d, rng, 1.5), random_vector(d, rng, 1.5),
                            random_vector(d, rng, 1.5)};
    DistMultGrad grad;
    bce_term(v[0], v[1], v[2], positive, &grad);
    const Eigen::VectorXd* analytic[3] = {&grad.head, &grad.relation, &grad.tail};
    for (int which = 0; which < 3; ++which) {
      for (int k = 0; k < d; ++k) {
        Eigen::VectorXd plus[3] = {v[0], v[1], v[2]}, minus[3] = {v[0], v[1], v[2]};
        plus[which][k] += eps;
        minus[which][k] -= eps;
        const double numeric = (bce_term(plus[0], plus[1], plus[2], positive) -
                                bce_term(minus[0], minus[1], minus[2], positive)) /
                               (2 * eps);
        const double a = (*analytic[which])[k];
        const double rel = std::abs(a - numeric) / std::max(1.0, std::abs(a) + std::abs(numeric));
        worst = std::max(worst, rel);
      }
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("zero epochs leave the initialization untouched") {
  Rng rng(3);
  const auto g = testing::random_graph(rng);
  KgeConfig c;
  c.epochs = 0;
  c.dim = 6;
  c.seed = 44;
  const auto a = train_kge(g, c);
  const auto b = train_kge(g, c);
  CHECK(a.table().entities == b.table().entities);
  const double bound = 0.5 / c.dim;
  CHECK(a.table().entities.cwiseAbs().maxCoeff() <= bound);
  CHECK(a.table().relations.cwiseAbs().maxCoeff() <= bound);

  EmbeddingTable t = a.table();
  train_kge_table(g, c, t);
  CHECK(t.entities == a.table().entities);
  CHECK(t.relations == a.table().relations);
}

TEST_CASE("training on a toy KG improves filtered tail ranks") {
  GraphInput in;
  in.train.push_back({"u", "i", 1});
  in.triplets = {{"a", "likes", "b", 1}, {"c", "likes", "d", 2}, {"e", "likes", "f", 3}};
  const auto g = build_graph(in);
  const auto likes = *g.find_relation("likes");
  std::vector<Triplet> truth;
  for (const auto& [h, t] : {std::pair{"a", "b"}, {"c", "d"}, {"e", "f"}}) {
    truth.push_back({id(g, EntityKind::Attribute, h), likes, id(g, EntityKind::Attribute, t)});
  }

  KgeConfig c;
  c.dim = 8;
  c.seed = 9;
  c.epochs = 0;
  const auto before = train_kge(g, c);
  c.epochs = 200;
  c.lr = 0.01;
  KgeTrainReport report;
  const auto after = train_kge(g, c, &report);

  CHECK(mean_filtered_rank(g, after, truth) < mean_filtered_rank(g, before, truth));
  REQUIRE(report.epoch_loss.size() == 200);
  CHECK(report.epoch_loss.back() < report.epoch_loss.front());
  CHECK(after.table().all_finite());
}

TEST_CASE("training triplets are every stored non-self-loop edge") {
  Rng rng(8);
  const auto g = testing::random_graph(rng);
  const auto all = kge_training_triplets(g, true);
  CHECK(all.size() == g.num_stored_edges() - g.num_entities());
  for (const auto& t : all) CHECK(t.relation != kSelfLoop);
  const auto kg_only = kge_training_triplets(g, false);
  for (const auto& t : kg_only) {
    CHECK(t.relation != kInteract);
    CHECK(t.relation != kInteractedBy);
  }
}

TEST_CASE("held-out rows do not influence training") {
  Rng rng(12);
  GraphInput in = testing::random_input(rng, 8, 10, 4);
  // Held-out pairs over entities already present in training so that ids do
  // not depend on the test file.
  std::set<std::string> users, items;
  for (const auto& x : in.train) {
    users.insert(x.user);
    items.insert(x.item);
  }
  for (const auto& u : users) {
    for (const auto& i : items) {
      if (in.held_out.size() < 12 && (u.size() + i.size()) % 2 == 0) in.held_out.push_back({u, i, 0});
    }
  }
  REQUIRE(in.held_out.size() > 3);
  KgeConfig c;
  c.dim = 8;
  c.epochs = 5;
  c.seed = 3;
  const auto g1 = build_graph(in);
  const auto m1 = train_kge(g1, c);

  GraphInput shuffled = in;
  std::shuffle(shuffled.held_out.begin(), shuffled.held_out.end(), rng);
  shuffled.held_out.resize(shuffled.held_out.size() / 2);
  const auto g2 = build_graph(shuffled);
  const auto m2 = train_kge(g2, c);

  for (const auto& x : in.held_out) {
    const auto u1 = id(g1, EntityKind::User, x.user), i1 = id(g1, EntityKind::Item, x.item);
    const auto u2 = id(g2, EntityKind::User, x.user), i2 = id(g2, EntityKind::Item, x.item);
    CHECK(m1.shaping_score(u1, i1) == m2.shaping_score(u2, i2));
  }
}

TEST_CASE("ConvE is not available") {
  EmbeddingTable t;
  t.entities = RowMatrix::Zero(1, 2);
  t.relations = RowMatrix::Zero(4, 2);
  CHECK_THROWS_AS(ScoreModel(t, ScoreVariant::ConvE), ConfigError);
}

TEST_CASE("divergence is reported") {
  GraphInput in;
  in.train.push_back({"u", "i", 1});
  const auto g = build_graph(in);
  KgeConfig c;
  c.dim = 2;
  c.epochs = 1;
  Rng rng(1);
  EmbeddingTable t = EmbeddingTable::uniform(g.num_entities(), g.num_relations(), 2, rng);
  t.entities(0, 0) = std::nan("");
  CHECK_THROWS_AS(train_kge_table(g, c, t), TrainingError);
}

TEST_CASE("embedding checkpoint round trip") {
  testing::TempDir dir;
  Rng rng(6);
  const auto t = EmbeddingTable::uniform(7, 6, 5, rng);
  save_embeddings(t, dir / "kge.bin");
  const auto back = load_embeddings(dir / "kge.bin");
  REQUIRE(back.entities.rows() == 7);
  REQUIRE(back.relations.rows() == 6);
  REQUIRE(back.dim() == 5);
  for (Eigen::Index k = 0; k < t.entities.size(); ++k) {
    CHECK(back.entities.data()[k] == static_cast<double>(static_cast<float>(t.entities.data()[k])));
  }
  CHECK(std::filesystem::file_size(dir / "kge.bin") == 4 + 4 * 4 + 4 * (7 + 6) * 5);
  std::ofstream(dir / "bad.bin") << "nope";
  CHECK_THROWS_AS(load_embeddings(dir / "bad.bin"), DataError);
}
