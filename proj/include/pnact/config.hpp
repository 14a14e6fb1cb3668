#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "pnact/attack.hpp"
#include "pnact/metrics.hpp"
#include "pnact/trainer.hpp"

namespace pnact {

// Everything a run needs, loadable from one JSON file. Parsing is strict:
// an unrecognized key anywhere is a config error, so typos fail fast
// instead of silently running on defaults.
struct RunConfig {
  std::string env = "gridgoal";
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  PpoConfig ppo;
  PnactConfig pnact;
  AttackEvalConfig eval;

  static RunConfig from_json(const nlohmann::json& j);
  // Full effective config with every default materialized.
  nlohmann::json to_json() const;
  static RunConfig load(const std::string& path);
  void validate() const;
};

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

// Hash of the canonical (sorted-key) dump; identifies a config in manifests.
std::uint64_t config_hash(const nlohmann::json& j);
// FNV-1a over a file's bytes.
std::uint64_t file_checksum(const std::string& path);

// Values taken from PNACT_SEED / PNACT_OUTPUT_DIR; a malformed PNACT_SEED
// throws std::invalid_argument. Precedence is decided by the caller
// (flag > environment > config file > default).
struct EnvOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
};
EnvOverrides read_env_overrides();

// Writes <dir>/manifest.json recording the config hash, the seed, and a
// checksum per artifact file name.
void write_manifest(const std::string& dir, const nlohmann::json& config_json,
                    std::uint64_t seed,
                    const std::map<std::string, std::string>& artifacts);

}  // namespace pnact
