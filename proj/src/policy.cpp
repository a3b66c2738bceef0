#include "pathrec/policy.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "binary_io.hpp"

namespace pathrec {
namespace {

constexpr char kPolicyMagic[5] = "PPOL";
constexpr std::uint32_t kPolicyVersion = 1;

Eigen::VectorXd logistic(const Eigen::VectorXd& x) {
  return x.unaryExpr([](double v) { return sigmoid(v); });
}

void xavier(RowMatrix& m, Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = dist(rng);
  }
}

}  // namespace

bool PolicyParams::all_finite() const {
  bool ok = true;
  for_each_tensor([&](std::string_view, std::span<const double> data) {
    for (double v : data) ok = ok && std::isfinite(v);
  });
  return ok;
}

PolicyParams PolicyParams::zeros(std::size_t entities, std::size_t relations, int embed_dim,
                                 int hidden) {
  if (embed_dim < 1 || hidden < 1) throw ConfigError("policy dimensions must be >= 1");
  const int d2 = 2 * embed_dim;
  PolicyParams p;
  p.lstm_weight = RowMatrix::Zero(4 * hidden, d2 + hidden);
  p.lstm_bias = Eigen::VectorXd::Zero(4 * hidden);
  p.w1 = RowMatrix::Zero(hidden, hidden);
  p.b1 = Eigen::VectorXd::Zero(hidden);
  p.w2 = RowMatrix::Zero(d2, hidden);
  p.b2 = Eigen::VectorXd::Zero(d2);
  p.embeddings.entities = RowMatrix::Zero(static_cast<Eigen::Index>(entities), embed_dim);
  p.embeddings.relations = RowMatrix::Zero(static_cast<Eigen::Index>(relations), embed_dim);
  return p;
}

PolicyParams PolicyParams::zeros_like(const PolicyParams& like) {
  return zeros(static_cast<std::size_t>(like.embeddings.entities.rows()),
               static_cast<std::size_t>(like.embeddings.relations.rows()), like.embed_dim(),
               like.hidden());
}

PolicyParams PolicyParams::initialize(const EmbeddingTable& pretrained, int hidden, Rng& rng) {
  PolicyParams p = zeros(static_cast<std::size_t>(pretrained.entities.rows()),
                         static_cast<std::size_t>(pretrained.relations.rows()), pretrained.dim(),
                         hidden);
  const Eigen::Index d2 = 2 * pretrained.dim();
  // Each gate block is initialized as its own (d2 + h) -> h matrix.
  for (int gate = 0; gate < 4; ++gate) {
    RowMatrix block(hidden, d2 + hidden);
    xavier(block, hidden, d2 + hidden, rng);
    p.lstm_weight.middleRows(gate * hidden, hidden) = block;
  }
  p.lstm_bias.segment(hidden, hidden).setOnes();
  xavier(p.w1, hidden, hidden, rng);
  xavier(p.w2, d2, hidden, rng);
  p.embeddings = pretrained;
  return p;
}

void PolicyParams::set_zero() {
  for_each_tensor([](std::string_view, std::span<double> data) {
    std::fill(data.begin(), data.end(), 0.0);
  });
}

StateEncoding StateEncoding::zero(int hidden_size) {
  return {Eigen::VectorXd::Zero(hidden_size), Eigen::VectorXd::Zero(hidden_size)};
}

Eigen::VectorXd action_embedding(const EmbeddingTable& table, Edge action) {
  const Eigen::Index d = table.dim();
  Eigen::VectorXd v(2 * d);
  v.head(d) = table.relations.row(action.relation.index).transpose();
  v.tail(d) = table.entities.row(action.target.index).transpose();
  return v;
}

StateEncoding lstm_step(const PolicyParams& params, const StateEncoding& prev,
                        const Eigen::VectorXd& input, LstmCache* cache) {
  const Eigen::Index h = params.hidden();
  const Eigen::Index d2 = input.size();
  const Eigen::VectorXd pre = params.lstm_weight.leftCols(d2) * input +
                              params.lstm_weight.rightCols(h) * prev.hidden + params.lstm_bias;
  Eigen::VectorXd i = logistic(pre.segment(0, h));
  Eigen::VectorXd f = logistic(pre.segment(h, h));
  Eigen::VectorXd o = logistic(pre.segment(2 * h, h));
  Eigen::VectorXd g = pre.segment(3 * h, h).array().tanh().matrix();

  StateEncoding next;
  next.cell = f.cwiseProduct(prev.cell) + i.cwiseProduct(g);
  Eigen::VectorXd tanh_c = next.cell.array().tanh().matrix();
  next.hidden = o.cwiseProduct(tanh_c);

  if (cache) {
    cache->input = input;
    cache->h_prev = prev.hidden;
    cache->c_prev = prev.cell;
    cache->i = std::move(i);
    cache->f = std::move(f);
    cache->o = std::move(o);
    cache->g = std::move(g);
    cache->tanh_c = std::move(tanh_c);
  }
  return next;
}

StateEncoding encode_initial(const PolicyParams& params, EntityId user) {
  return lstm_step(params, StateEncoding::zero(params.hidden()),
                   action_embedding(params.embeddings, {kStartRelation, user}));
}

StateEncoding encode_step(const PolicyParams& params, const StateEncoding& prev, Edge action) {
  return lstm_step(params, prev, action_embedding(params.embeddings, action));
}

Eigen::VectorXd policy_head(const PolicyParams& params, const Eigen::VectorXd& hidden,
                            HeadCache* cache) {
  Eigen::VectorXd z1 = params.w1 * hidden + params.b1;
  Eigen::VectorXd a1 = z1.cwiseMax(0.0);
  Eigen::VectorXd y = params.w2 * a1 + params.b2;
  if (cache) {
    cache->hidden = hidden;
    cache->z1 = std::move(z1);
    cache->a1 = std::move(a1);
  }
  return y;
}

Eigen::VectorXd masked_softmax(const Eigen::VectorXd& logits, const std::vector<char>& keep) {
  const Eigen::Index n = logits.size();
  auto kept = [&](Eigen::Index j) { return keep.empty() || keep[static_cast<std::size_t>(j)]; };
  double max_logit = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (kept(j)) max_logit = std::max(max_logit, logits[j]);
  }
  Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
  double total = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!kept(j)) continue;
    p[j] = std::exp(logits[j] - max_logit);
    total += p[j];
  }
  return p / total;
}

std::vector<char> action_dropout_mask(std::span<const Edge> candidates, double rate, Rng& rng) {
  std::vector<char> keep(candidates.size(), 1);
  if (rate <= 0.0) return keep;
  std::bernoulli_distribution drop(rate);
  bool any = false;
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    if (candidates[j].relation != kSelfLoop && drop(rng)) keep[j] = 0;
    any = any || keep[j];
  }
  if (!any) std::fill(keep.begin(), keep.end(), 1);
  return keep;
}

ActionDistribution action_distribution(const PolicyParams& params, const StateEncoding& state,
                                       std::span<const Edge> candidates, double dropout_rate,
                                       PolicyMode mode, Rng* rng) {
  if (candidates.empty()) throw std::invalid_argument("action_distribution: no candidates");
  std::vector<Eigen::VectorXd> embedded;
  embedded.reserve(candidates.size());
  for (const Edge& e : candidates) embedded.push_back(action_embedding(params.embeddings, e));
  std::vector<char> keep;
  if (mode == PolicyMode::Train && dropout_rate > 0.0) {
    if (!rng) throw std::invalid_argument("action_distribution: dropout needs an rng");
    keep = action_dropout_mask(candidates, dropout_rate, *rng);
  }
  return action_distribution(params, state, embedded, keep);
}

ActionDistribution action_distribution(const PolicyParams& params, const StateEncoding& state,
                                       std::span<const Eigen::VectorXd> candidates,
                                       const std::vector<char>& keep) {
  if (candidates.empty()) throw std::invalid_argument("action_distribution: no candidates");
  const Eigen::VectorXd y = policy_head(params, state.hidden);
  ActionDistribution out;
  out.logits.resize(static_cast<Eigen::Index>(candidates.size()));
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    out.logits[static_cast<Eigen::Index>(j)] = candidates[j].dot(y);
  }
  out.keep = keep.empty() ? std::vector<char>(candidates.size(), 1) : keep;
  out.probs = masked_softmax(out.logits, out.keep);
  return out;
}

std::size_t sample_action(const Eigen::VectorXd& probs, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (Eigen::Index j = 0; j < probs.size(); ++j) {
    if (probs[j] <= 0.0) continue;
    last_positive = static_cast<std::size_t>(j);
    acc += probs[j];
    if (u < acc) return last_positive;
  }
  return last_positive;
}

PolicyTape::PolicyTape(const PolicyParams& params, EntityId user,
                       const Eigen::VectorXd* input_mask)
    : params_(&params), state_(StateEncoding::zero(params.hidden())) {
  feed({kStartRelation, user}, input_mask);
}

void PolicyTape::feed(Edge edge, const Eigen::VectorXd* mask) {
  Input in;
  in.edge = edge;
  Eigen::VectorXd x = action_embedding(params_->embeddings, edge);
  if (mask) {
    in.mask = *mask;
    x = x.cwiseProduct(*mask);
  }
  state_ = lstm_step(*params_, state_, x, &in.cache);
  inputs_.push_back(std::move(in));
}

const Eigen::VectorXd& PolicyTape::score(std::vector<Edge> candidates, std::vector<char> keep) {
  if (candidates.empty()) throw std::invalid_argument("PolicyTape::score: no candidates");
  Decision d;
  d.query = policy_head(*params_, state_.hidden, &d.head);
  Eigen::VectorXd logits(static_cast<Eigen::Index>(candidates.size()));
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    logits[static_cast<Eigen::Index>(j)] =
        action_embedding(params_->embeddings, candidates[j]).dot(d.query);
  }
  d.probs = masked_softmax(logits, keep);
  d.candidates = std::move(candidates);
  d.state_index = inputs_.size() - 1;
  pending_ = std::move(d);
  has_pending_ = true;
  return pending_.probs;
}

double PolicyTape::commit(std::size_t index, bool advance, const Eigen::VectorXd* input_mask) {
  if (!has_pending_) throw std::logic_error("PolicyTape::commit without score");
  if (index >= pending_.candidates.size() || pending_.probs[static_cast<Eigen::Index>(index)] <= 0) {
    throw std::invalid_argument("PolicyTape::commit: action not available");
  }
  pending_.chosen = index;
  const double lp = std::log(pending_.probs[static_cast<Eigen::Index>(index)]);
  log_prob_ += lp;
  const Edge edge = pending_.candidates[index];
  decisions_.push_back(std::move(pending_));
  has_pending_ = false;
  if (advance) feed(edge, input_mask);
  return lp;
}

void PolicyTape::backprop(double coeff, PolicyParams& grad, bool embedding_grads) const {
  const PolicyParams& p = *params_;
  const Eigen::Index d = p.embed_dim();
  const Eigen::Index h = p.hidden();
  std::vector<Eigen::VectorXd> dh(inputs_.size(), Eigen::VectorXd::Zero(h));

  for (const Decision& dec : decisions_) {
    // d log p[chosen] / d logit_j = [j == chosen] - p_j over the kept set.
    Eigen::VectorXd dy = Eigen::VectorXd::Zero(2 * d);
    for (std::size_t j = 0; j < dec.candidates.size(); ++j) {
      const double pj = dec.probs[static_cast<Eigen::Index>(j)];
      const double gj = coeff * ((j == dec.chosen ? 1.0 : 0.0) - pj);
      if (gj == 0.0) continue;
      const Edge& e = dec.candidates[j];
      dy.head(d) += gj * p.embeddings.relations.row(e.relation.index).transpose();
      dy.tail(d) += gj * p.embeddings.entities.row(e.target.index).transpose();
      if (embedding_grads) {
        grad.embeddings.relations.row(e.relation.index) += gj * dec.query.head(d).transpose();
        grad.embeddings.entities.row(e.target.index) += gj * dec.query.tail(d).transpose();
      }
    }
    grad.w2.noalias() += dy * dec.head.a1.transpose();
    grad.b2 += dy;
    const Eigen::VectorXd dz1 =
        (p.w2.transpose() * dy).cwiseProduct((dec.head.z1.array() > 0.0).cast<double>().matrix());
    grad.w1.noalias() += dz1 * dec.head.hidden.transpose();
    grad.b1 += dz1;
    dh[dec.state_index] += p.w1.transpose() * dz1;
  }

  Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(h);
  Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(h);
  for (std::size_t s = inputs_.size(); s-- > 0;) {
    const LstmCache& c = inputs_[s].cache;
    const Eigen::VectorXd dhs = dh[s] + dh_next;
    const Eigen::VectorXd dc =
        dc_next + dhs.cwiseProduct(c.o).cwiseProduct((1.0 - c.tanh_c.array().square()).matrix());
    Eigen::VectorXd dpre(4 * h);
    dpre.segment(0, h) = dc.cwiseProduct(c.g).cwiseProduct((c.i.array() * (1.0 - c.i.array())).matrix());
    dpre.segment(h, h) =
        dc.cwiseProduct(c.c_prev).cwiseProduct((c.f.array() * (1.0 - c.f.array())).matrix());
    dpre.segment(2 * h, h) =
        dhs.cwiseProduct(c.tanh_c).cwiseProduct((c.o.array() * (1.0 - c.o.array())).matrix());
    dpre.segment(3 * h, h) = dc.cwiseProduct(c.i).cwiseProduct((1.0 - c.g.array().square()).matrix());

    grad.lstm_weight.leftCols(2 * d).noalias() += dpre * c.input.transpose();
    grad.lstm_weight.rightCols(h).noalias() += dpre * c.h_prev.transpose();
    grad.lstm_bias += dpre;

    if (embedding_grads) {
      Eigen::VectorXd dx = p.lstm_weight.leftCols(2 * d).transpose() * dpre;
      if (inputs_[s].mask.size() > 0) dx = dx.cwiseProduct(inputs_[s].mask);
      const Edge& e = inputs_[s].edge;
      grad.embeddings.relations.row(e.relation.index) += dx.head(d).transpose();
      grad.embeddings.entities.row(e.target.index) += dx.tail(d).transpose();
    }
    dh_next = p.lstm_weight.rightCols(h).transpose() * dpre;
    dc_next = dc.cwiseProduct(c.f);
  }
}

double global_norm(const PolicyParams& grad, bool include_embeddings) {
  double sq = 0.0;
  grad.for_each_tensor([&](std::string_view name, std::span<const double> data) {
    if (!include_embeddings && is_embedding_tensor(name)) return;
    for (double v : data) sq += v * v;
  });
  return std::sqrt(sq);
}

void scale_in_place(PolicyParams& grad, double factor) {
  grad.for_each_tensor([&](std::string_view, std::span<double> data) {
    for (double& v : data) v *= factor;
  });
}

void save_policy(const PolicyParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  binio::put_magic(out, kPolicyMagic);
  binio::put_u32(out, kPolicyVersion);
  binio::put_u32(out, static_cast<std::uint32_t>(params.embed_dim()));
  binio::put_u32(out, static_cast<std::uint32_t>(params.hidden()));
  binio::put_u32(out, static_cast<std::uint32_t>(params.embeddings.entities.rows()));
  binio::put_u32(out, static_cast<std::uint32_t>(params.embeddings.relations.rows()));
  params.for_each_tensor(
      [&](std::string_view, std::span<const double> data) { binio::put_f32s(out, data); });
  if (!out) throw DataError("failed writing " + path.string());
}

PolicyParams load_policy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  binio::expect_magic(in, kPolicyMagic, path.string());
  if (const auto version = binio::get_u32(in); version != kPolicyVersion) {
    throw DataError(path.string() + ": unsupported policy checkpoint version " +
                    std::to_string(version));
  }
  const auto d = static_cast<int>(binio::get_u32(in));
  const auto h = static_cast<int>(binio::get_u32(in));
  const auto n = binio::get_u32(in);
  const auto m = binio::get_u32(in);
  PolicyParams p = PolicyParams::zeros(n, m, d, h);
  p.for_each_tensor([&](std::string_view, std::span<double> data) { binio::get_f32s(in, data); });
  return p;
}

}  // namespace pathrec
