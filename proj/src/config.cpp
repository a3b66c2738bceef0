#include "pathrec/config.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <sstream>
#include <type_traits>
#include <variant>

namespace pathrec {
namespace {

using Member = std::variant<int RunConfig::*, double RunConfig::*,
                            bool RunConfig::*, std::uint64_t RunConfig::*,
                            std::filesystem::path RunConfig::*, RankStrategy RunConfig::*>;

constexpr int kNoStage = -1;   // semantic, but no single stage depends on it
constexpr int kIgnored = -2;   // never hashed

struct Field {
  const char* key;
  Member member;
  int stage;
};

const std::array<Field, 32>& fields() {
  static const std::array<Field, 32> table{{
      {"interactions", &RunConfig::interactions, 0},
      {"triplets", &RunConfig::triplets, 0},
      {"matches", &RunConfig::matches, 0},
      {"data", &RunConfig::data, 0},
      {"out", &RunConfig::out, kIgnored},
      {"dim", &RunConfig::dim, 1},
      {"kge_epochs", &RunConfig::kge_epochs, 1},
      {"negatives", &RunConfig::negatives, 1},
      {"kge_lr", &RunConfig::kge_lr, 1},
      {"kge_dropout", &RunConfig::kge_dropout, 1},
      {"kge_batch", &RunConfig::kge_batch, 1},
      {"kge_interactions", &RunConfig::kge_interactions, 1},
      {"no_kg", &RunConfig::no_kg, 1},
      {"hidden", &RunConfig::hidden, 2},
      {"max_len", &RunConfig::max_len, 2},
      {"batch", &RunConfig::batch, 2},
      {"policy_epochs", &RunConfig::policy_epochs, 2},
      {"policy_lr", &RunConfig::policy_lr, 2},
      {"action_dropout", &RunConfig::action_dropout, 2},
      {"embed_dropout", &RunConfig::embed_dropout, 2},
      {"clip_norm", &RunConfig::clip_norm, 2},
      {"max_fanout", &RunConfig::max_fanout, 2},
      {"rollouts_per_user", &RunConfig::rollouts_per_user, 2},
      {"baseline", &RunConfig::baseline, 2},
      {"no_reward_shaping", &RunConfig::no_reward_shaping, 2},
      {"no_action_dropout", &RunConfig::no_action_dropout, 2},
      {"freeze_embeddings", &RunConfig::freeze_embeddings, 2},
      {"beam", &RunConfig::beam, 3},
      {"k", &RunConfig::k, 3},
      {"strategy", &RunConfig::strategy, 3},
      {"runs", &RunConfig::runs, kNoStage},
      {"seed", &RunConfig::seed, kNoStage},
  }};
  return table;
}

std::string_view canonical_key(std::string_view key) {
  if (key == "d") return "dim";
  if (key == "h") return "hidden";
  if (key == "T") return "max_len";
  return key;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_bool(std::string_view s, bool& out) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return out = true, true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return out = false, true;
  return false;
}

// Empty string on success, otherwise what was expected.
std::string assign(RunConfig& c, const Member& member, std::string_view v) {
  return std::visit(
      [&](auto ptr) -> std::string {
        using T = std::remove_reference_t<decltype(c.*ptr)>;
        if constexpr (std::is_same_v<T, bool>) {
          return parse_bool(v, c.*ptr) ? "" : "expected true or false";
        } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
          c.*ptr = std::filesystem::path(std::string(v));
          return "";
        } else if constexpr (std::is_same_v<T, RankStrategy>) {
          try {
            c.*ptr = parse_strategy(v);
            return "";
          } catch (const ConfigError&) {
            return "expected path or reward";
          }
        } else if constexpr (std::is_floating_point_v<T>) {
          return parse_number(v, c.*ptr) ? "" : "expected a number";
        } else {
          // Reject "-1" for unsigned fields instead of wrapping.
          if (!v.empty() && v.front() == '-' && std::is_unsigned_v<T>) {
            return "expected a non-negative integer";
          }
          return parse_number(v, c.*ptr) ? "" : "expected an integer";
        }
      },
      member);
}

std::string format(const RunConfig& c, const Member& member) {
  return std::visit(
      [&](auto ptr) -> std::string {
        using T = std::remove_cvref_t<decltype(c.*ptr)>;
        const T& value = c.*ptr;
        if constexpr (std::is_same_v<T, bool>) {
          return value ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
          return value.string();
        } else if constexpr (std::is_same_v<T, RankStrategy>) {
          return std::string(strategy_name(value));
        } else {
          char buf[64];
          auto res = std::to_chars(buf, buf + sizeof buf, value);
          return std::string(buf, res.ptr);
        }
      },
      member);
}

const Field* find_field(std::string_view key) {
  key = canonical_key(key);
  for (const auto& f : fields()) {
    if (key == f.key) return &f;
  }
  return nullptr;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::Ingest: return "ingest";
    case Stage::TrainKge: return "train-kge";
    case Stage::TrainPolicy: return "train-policy";
    case Stage::Recommend: return "recommend";
    case Stage::Evaluate: return "evaluate";
  }
  return "?";
}

std::vector<Setting> parse_settings(std::string_view text) {
  std::vector<Setting> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value', got '" +
                        std::string(line) + "'");
    }
    const std::string_view key = trim(line.substr(0, eq));
    if (key.empty() || key.find_first_of(" \t") != std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": malformed key '" +
                        std::string(key) + "'");
    }
    out.push_back({std::string(key), std::string(trim(line.substr(eq + 1))), line_no});
  }
  return out;
}

std::vector<std::string> apply_settings(RunConfig& config, const std::vector<Setting>& settings) {
  std::vector<std::string> errors;
  for (const auto& s : settings) {
    const std::string where = s.line ? " (line " + std::to_string(s.line) + ")" : "";
    const Field* f = find_field(s.key);
    if (!f) {
      errors.push_back(s.key + ": unknown key" + where);
      continue;
    }
    if (std::string why = assign(config, f->member, s.value); !why.empty()) {
      errors.push_back(s.key + ": " + why + ", got '" + s.value + "'" + where);
    }
  }
  return errors;
}

std::vector<Setting> env_settings(const std::function<const char*(const char*)>& lookup) {
  std::vector<Setting> out;
  for (const auto& f : fields()) {
    std::string var = "PATHREC_";
    for (const char* p = f.key; *p; ++p) {
      var += static_cast<char>(std::toupper(static_cast<unsigned char>(*p)));
    }
    const char* value = lookup ? lookup(var.c_str()) : std::getenv(var.c_str());
    if (value) out.push_back({f.key, value, 0});
  }
  return out;
}

std::vector<std::string> check_config(const RunConfig& c) {
  std::vector<std::string> errors;
  auto require = [&](bool ok, const char* key, const char* constraint) {
    if (!ok) errors.push_back(std::string(key) + ": must satisfy " + constraint);
  };
  auto rate = [&](double v, const char* key) { require(v >= 0.0 && v < 1.0, key, "0 <= x < 1"); };
  auto lr = [&](double v, const char* key) { require(v > 0.0 && v < 1.0, key, "0 < x < 1"); };
  rate(c.action_dropout, "action_dropout");
  rate(c.embed_dropout, "embed_dropout");
  rate(c.kge_dropout, "kge_dropout");
  lr(c.kge_lr, "kge_lr");
  lr(c.policy_lr, "policy_lr");
  require(c.dim >= 1, "dim", "x >= 1");
  require(c.hidden >= 1, "hidden", "x >= 1");
  require(c.max_len >= 1, "max_len", "x >= 1");
  require(c.beam >= 1, "beam", "x >= 1");
  require(c.batch >= 1, "batch", "x >= 1");
  require(c.kge_batch >= 1, "kge_batch", "x >= 1");
  require(c.k >= 1, "k", "x >= 1");
  require(c.negatives >= 1, "negatives", "x >= 1");
  require(c.kge_epochs >= 0, "kge_epochs", "x >= 0");
  require(c.policy_epochs >= 0, "policy_epochs", "x >= 0");
  require(c.clip_norm > 0.0, "clip_norm", "x > 0");
  require(c.max_fanout >= 1, "max_fanout", "x >= 1");
  require(c.rollouts_per_user >= 1, "rollouts_per_user", "x >= 1");
  require(c.runs >= 1, "runs", "x >= 1");
  return errors;
}

ValidatedConfig validate_config(std::string_view text) {
  ValidatedConfig v;
  v.errors = apply_settings(v.config, parse_settings(text));
  for (auto& e : check_config(v.config)) v.errors.push_back(std::move(e));
  return v;
}

std::string to_text(const RunConfig& config) {
  std::ostringstream out;
  for (const auto& f : fields()) out << f.key << " = " << format(config, f.member) << '\n';
  return out.str();
}

std::uint64_t config_hash(const RunConfig& config) {
  std::uint64_t h = fnv1a("pathrec-config-1\n");
  for (const auto& f : fields()) {
    if (f.stage == kIgnored) continue;
    h = fnv1a(std::string(f.key) + "=" + format(config, f.member) + "\n", h);
  }
  return h;
}

std::uint64_t stage_hash(const RunConfig& config, Stage stage, std::uint64_t seed) {
  std::uint64_t h = fnv1a("pathrec-stage-1\n");
  h = fnv1a("run_seed=" + std::to_string(seed) + "\n", h);
  for (const auto& f : fields()) {
    if (f.stage < 0 || f.stage > static_cast<int>(stage)) continue;
    h = fnv1a(std::string(f.key) + "=" + format(config, f.member) + "\n", h);
  }
  return h;
}

std::string hex_hash(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

KgeConfig kge_config(const RunConfig& c, std::uint64_t seed) {
  KgeConfig k;
  k.dim = c.dim;
  k.epochs = c.kge_epochs;
  k.negatives = c.negatives;
  k.lr = c.kge_lr;
  k.dropout = c.kge_dropout;
  k.batch_size = c.kge_batch;
  k.seed = seed;
  k.include_interactions = c.kge_interactions;
  return k;
}

PolicyTrainConfig policy_config(const RunConfig& c, std::uint64_t seed) {
  PolicyTrainConfig p;
  p.epochs = c.policy_epochs;
  p.batch_size = c.batch;
  p.max_len = c.max_len;
  p.hidden = c.hidden;
  p.lr = c.policy_lr;
  p.action_dropout = c.no_action_dropout ? 0.0 : c.action_dropout;
  p.embed_dropout = c.embed_dropout;
  p.clip_norm = c.clip_norm;
  p.reward_shaping = !c.no_reward_shaping;
  p.freeze_embeddings = c.freeze_embeddings;
  p.baseline = c.baseline;
  p.max_fanout = c.max_fanout;
  p.rollouts_per_user = c.rollouts_per_user;
  p.seed = seed;
  p.valid_k = c.k;
  p.valid_beam = c.beam;
  return p;
}

RecommendOptions recommend_options(const RunConfig& c) {
  RecommendOptions r;
  r.max_len = c.max_len;
  r.beam_width = c.beam;
  r.k = c.k;
  r.strategy = c.strategy;
  return r;
}

BuildOptions build_options(const RunConfig& c) {
  BuildOptions b;
  b.include_kg = !c.no_kg;
  return b;
}

}  // namespace pathrec
