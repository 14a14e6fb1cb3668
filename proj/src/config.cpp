#include "pnact/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <stdexcept>

namespace pnact {

namespace {

class StrictObject {
 public:
  StrictObject(const nlohmann::json& obj, std::string where)
      : obj_(obj), where_(std::move(where)) {
    if (!obj.is_object())
      throw std::invalid_argument("config: " + where_ + " must be an object");
  }

  template <typename T>
  void take(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("config: bad value for '" + where_ + "." +
                                  key + "': " + e.what());
    }
  }

  const nlohmann::json* child(const char* key) {
    seen_.insert(key);
    return obj_.contains(key) ? &obj_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& item : obj_.items())
      if (!seen_.count(item.key()))
        throw std::invalid_argument("config: unknown key '" + where_ + "." +
                                    item.key() + "'");
  }

 private:
  const nlohmann::json& obj_;
  std::string where_;
  std::set<std::string> seen_;
};

PpoConfig ppo_from_json(const nlohmann::json& j) {
  PpoConfig cfg;
  StrictObject o(j, "ppo");
  o.take("algo", cfg.algo);
  o.take("total_steps", cfg.total_steps);
  o.take("batch_steps", cfg.batch_steps);
  o.take("minibatch", cfg.minibatch);
  o.take("epochs", cfg.epochs);
  o.take("gae_lambda", cfg.gae_lambda);
  o.take("clip_ratio", cfg.clip_ratio);
  o.take("lr", cfg.lr);
  o.take("entropy_coef", cfg.entropy_coef);
  o.take("lambda_lr", cfg.lambda_lr);
  o.take("lambda_init", cfg.lambda_init);
  o.take("hidden", cfg.hidden);
  o.take("eval_every", cfg.eval_every);
  o.take("eval_episodes", cfg.eval_episodes);
  o.finish();
  return cfg;
}

nlohmann::json ppo_to_json(const PpoConfig& cfg) {
  return {{"algo", cfg.algo},
          {"total_steps", cfg.total_steps},
          {"batch_steps", cfg.batch_steps},
          {"minibatch", cfg.minibatch},
          {"epochs", cfg.epochs},
          {"gae_lambda", cfg.gae_lambda},
          {"clip_ratio", cfg.clip_ratio},
          {"lr", cfg.lr},
          {"entropy_coef", cfg.entropy_coef},
          {"lambda_lr", cfg.lambda_lr},
          {"lambda_init", cfg.lambda_init},
          {"hidden", cfg.hidden},
          {"eval_every", cfg.eval_every},
          {"eval_episodes", cfg.eval_episodes}};
}

PnactConfig pnact_from_json(const nlohmann::json& j) {
  PnactConfig cfg;
  StrictObject o(j, "pnact");
  o.take("n", cfg.n);
  std::string schedule = schedule_to_string(cfg.schedule);
  o.take("schedule", schedule);
  cfg.schedule = schedule_from_string(schedule);
  o.take("f", cfg.f);
  o.take("k", cfg.k);
  o.take("lambda", cfg.lambda);
  o.take("alpha", cfg.alpha);
  o.take("beta", cfg.beta);
  o.take("mu", cfg.mu);
  o.take("margin", cfg.margin);
  o.take("total_steps", cfg.total_steps);
  o.take("batch_steps", cfg.batch_steps);
  o.take("minibatch", cfg.minibatch);
  o.take("epochs", cfg.epochs);
  o.take("lr", cfg.lr);
  o.take("hidden", cfg.hidden);
  o.take("eval_every", cfg.eval_every);
  o.take("eval_episodes", cfg.eval_episodes);
  o.finish();
  return cfg;
}

nlohmann::json pnact_to_json(const PnactConfig& cfg) {
  return {{"n", cfg.n},
          {"schedule", schedule_to_string(cfg.schedule)},
          {"f", cfg.f},
          {"k", cfg.k},
          {"lambda", cfg.lambda},
          {"alpha", cfg.alpha},
          {"beta", cfg.beta},
          {"mu", cfg.mu},
          {"margin", cfg.margin},
          {"total_steps", cfg.total_steps},
          {"batch_steps", cfg.batch_steps},
          {"minibatch", cfg.minibatch},
          {"epochs", cfg.epochs},
          {"lr", cfg.lr},
          {"hidden", cfg.hidden},
          {"eval_every", cfg.eval_every},
          {"eval_episodes", cfg.eval_episodes}};
}

AttackEvalConfig eval_from_json(const nlohmann::json& j) {
  AttackEvalConfig cfg;
  StrictObject o(j, "eval");
  o.take("episodes", cfg.episodes);
  o.take("n", cfg.n);
  std::string schedule = schedule_to_string(cfg.schedule);
  o.take("schedule", schedule);
  cfg.schedule = schedule_from_string(schedule);
  o.take("f", cfg.f);
  o.take("k", cfg.k);
  o.take("greedy", cfg.greedy);
  o.finish();
  return cfg;
}

nlohmann::json eval_to_json(const AttackEvalConfig& cfg) {
  return {{"episodes", cfg.episodes},
          {"n", cfg.n},
          {"schedule", schedule_to_string(cfg.schedule)},
          {"f", cfg.f},
          {"k", cfg.k},
          {"greedy", cfg.greedy}};
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig cfg;
  StrictObject o(j, "config");
  o.take("env", cfg.env);
  o.take("seed", cfg.seed);
  o.take("output_dir", cfg.output_dir);
  if (const nlohmann::json* ppo = o.child("ppo")) cfg.ppo = ppo_from_json(*ppo);
  if (const nlohmann::json* pn = o.child("pnact"))
    cfg.pnact = pnact_from_json(*pn);
  if (const nlohmann::json* ev = o.child("eval"))
    cfg.eval = eval_from_json(*ev);
  o.finish();
  return cfg;
}

nlohmann::json RunConfig::to_json() const {
  return {{"env", env},
          {"seed", seed},
          {"output_dir", output_dir},
          {"ppo", ppo_to_json(ppo)},
          {"pnact", pnact_to_json(pnact)},
          {"eval", eval_to_json(eval)}};
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config: " + path + " is not valid JSON: " +
                                e.what());
  }
  return from_json(j);
}

void RunConfig::validate() const {
  if (env != "gridgoal" && env != "pointlite")
    throw std::invalid_argument("config: unknown env '" + env + "'");
  if (output_dir.empty())
    throw std::invalid_argument("config: output_dir must not be empty");
  ppo.validate();
  pnact.validate();
  eval.validate();
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t config_hash(const nlohmann::json& j) {
  return fnv1a64(j.dump());
}

std::uint64_t file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("file_checksum: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return fnv1a64(bytes);
}

EnvOverrides read_env_overrides() {
  EnvOverrides out;
  if (const char* s = std::getenv("PNACT_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s, &end, 10);
    if (end == s || *end != '\0')
      throw std::invalid_argument(
          "PNACT_SEED must be an unsigned integer, got '" + std::string(s) +
          "'");
    out.seed = static_cast<std::uint64_t>(v);
  }
  if (const char* s = std::getenv("PNACT_OUTPUT_DIR")) {
    if (*s == '\0')
      throw std::invalid_argument("PNACT_OUTPUT_DIR must not be empty");
    out.output_dir = s;
  }
  return out;
}

void write_manifest(const std::string& dir, const nlohmann::json& config_json,
                    std::uint64_t seed,
                    const std::map<std::string, std::string>& artifacts) {
  nlohmann::json j;
  j["config_hash"] = hex64(config_hash(config_json));
  j["seed"] = seed;
  j["artifacts"] = artifacts;
  const std::string path = dir + "/manifest.json";
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("write_manifest: cannot open " + path);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("write_manifest: write failed");
}

}  // namespace pnact
