#pragma once

// Config-driven pipelines behind the advkit executable. Every run writes a
// manifest; outputs go under models/, results/, traces/ and reports/.

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "advkit/attack.hpp"
#include "advkit/bayesopt.hpp"
#include "advkit/data.hpp"
#include "advkit/defense.hpp"

namespace advkit::cli {

inline constexpr const char* kVersion = "0.1.0";
// Default output root when --out is not given.
inline constexpr const char* kOutEnv = "ADVKIT_OUT";
inline constexpr const char* kManifestKind = "advkit-manifest";

const std::vector<std::string>& command_names();

// Every file goes through one writer; concurrent callers are serialized.
class ReportWriter {
 public:
  explicit ReportWriter(std::filesystem::path root);
  void write(const std::string& rel, const std::string& content);
  const std::filesystem::path& root() const { return root_; }
  // Relative path -> FNV-1a digest of the bytes written, in write order.
  std::vector<std::pair<std::string, std::string>> written() const;

 private:
  std::filesystem::path root_;
  mutable std::mutex mu_;
  std::vector<std::pair<std::string, std::string>> written_;
};

std::string fnv1a_hex(const std::string& bytes);
// Hash of the canonical (sorted-key, compact) dump.
std::string config_hash(const nlohmann::json& config);
// Shortest round-trip decimal form.
std::string fmt(double v);

struct NamedModelSpec {
  std::string name;
  ModelKind kind;
  HyperParams hp;
};

struct DefenseSpec {
  std::string name;
  std::string method;  // nat, avg_at, max_at, r_at, te_at
  ModelKind kind;
  std::vector<std::string> attacks;
  Vec weights;                         // avg_at, te_at
  std::vector<std::string> substitutes;  // te_at: model names from models/
  AtConfig at;
  BayesOptConfig bo;
  double eval_epoch_fraction = 1.0;
};

struct ArmsRaceSpec {
  ModelKind kind = ModelKind::kMLP;
  std::vector<std::string> attacks;
  std::size_t rounds = 2;
  AtConfig at;
  BayesOptConfig defense_bo;
  BayesOptConfig attack_bo;
};

// Parsed and validated experiment. Field errors name the JSON path, e.g.
// "config.attacks[1].kind: unknown attack 'x' (valid: ...)".
struct Config {
  nlohmann::json raw;
  std::uint64_t seed = 0;
  // data
  std::optional<SynthSpec> synth;
  std::string csv_path, schema_path;
  std::array<unsigned, 3> split = {3, 1, 1};
  std::vector<NamedModelSpec> models;
  std::map<std::string, AttackSpec> attacks;
  std::vector<std::string> attack_order;
  // attack command
  std::vector<std::string> attack_models, attack_attacks;
  std::optional<BayesOptConfig> adaptive;
  std::vector<DefenseSpec> defenses;
  std::vector<std::string> matrix_attacks, matrix_defenses;
  std::optional<ArmsRaceSpec> armsrace;

  const AttackSpec& attack(const std::string& name, const std::string& where) const;
};

// Reads a config file; a manifest is accepted too and replays its config.
// Relative data paths are resolved against the file's directory.
nlohmann::json read_config(const std::string& path);
Config parse_config(const nlohmann::json& j);

BayesOptConfig bayesopt_from_json(const nlohmann::json& j, const std::string& where);
AtConfig at_from_json(const nlohmann::json& j, const std::string& where);

struct RunOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  int jobs = 0;  // 0 keeps the OpenMP default
};

std::string default_out_root();

// Runs one subcommand end to end and writes manifest_<command>.json.
// Returns the output root.
std::filesystem::path run(const std::string& command, const RunOptions& options);

// Individual pipelines; `cfg.seed` already carries any override.
void cmd_train(const Config& cfg, ReportWriter& out);
void cmd_attack(const Config& cfg, ReportWriter& out);
void cmd_defend(const Config& cfg, ReportWriter& out);
void cmd_matrix(const Config& cfg, ReportWriter& out);
void cmd_armsrace(const Config& cfg, ReportWriter& out);

}  // namespace advkit::cli
