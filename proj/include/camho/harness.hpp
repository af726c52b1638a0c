#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "camho/agent.hpp"
#include "camho/baselines.hpp"
#include "camho/scenario.hpp"
#include "camho/trace.hpp"
#include "json.hpp"

namespace camho {

namespace fs = std::filesystem;

enum ExitCode { kOk = 0, kInternalError = 1, kInputError = 2, kCompatibilityError = 3 };

/// Maps the library's exception types to process exit codes.
int exit_code_for(const std::exception& e);

/// Git-style SHA-256: a file hashes as "blob <size>\0<bytes>"; a directory
/// hashes the sorted "<hash> <relative path>\n" lines of its files.
std::string content_hash(const fs::path& path);
std::string sha256_hex(const std::string& bytes);

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  nlohmann::json config = nlohmann::json::object();
  std::optional<std::uint64_t> seed;
  std::vector<std::pair<std::string, std::string>> inputs;   // path, content hash
  std::vector<std::pair<std::string, std::string>> outputs;  // path, content hash
  std::string started_utc;
  std::string finished_utc;
  nlohmann::json extra = nlohmann::json::object();

  void add_input(const fs::path& p);
  void add_output(const fs::path& p);
  nlohmann::json to_json() const;
};

std::string utc_now();
void write_json(const nlohmann::json& j, const fs::path& path);
nlohmann::json read_json_file(const fs::path& path);

struct Window {
  int t0 = 0;
  int t1 = 0;
};
/// "t0,t1" in decision epochs of the evaluated segment.
Window parse_window(const std::string& text);

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::optional<fs::path> scene;  // reference scenario when absent
  fs::path out;
  std::optional<std::uint64_t> seed;
};

struct DipSummary {
  int bs = 0;
  int intervals = 0;
  int blocked_epochs = 0;
};

struct SynthResult {
  int length = 0;
  std::vector<DipSummary> dips;
  std::string hash;
};

/// Epoch runs where some walker attenuates a link by more than 1 dB.
std::vector<DipSummary> dip_summary(const SceneConfig& scene);
SynthResult cmd_synth(const SynthArgs& a, const std::vector<std::string>& argv);

struct TrainArgs {
  fs::path trace;
  std::optional<fs::path> config;
  fs::path out;
  std::optional<std::uint64_t> seed;
  std::optional<int> boundary;  // T'; two thirds of T when absent
  std::optional<int> disruption_ms;
  std::optional<int> single_camera;
  std::optional<int> iterations;
  bool quiet = false;
};

SplitSpec default_split(const Trace& trace, std::optional<int> boundary);
TrainResult cmd_train(const TrainArgs& a, const std::vector<std::string>& argv);

/// Stand-in policies usable wherever a checkpoint is accepted.
enum class Baseline { none, static1, static2, reactive, oracle };
Baseline baseline_from_string(const std::string& s);

struct EvalArgs {
  std::optional<fs::path> checkpoint;
  Baseline baseline = Baseline::none;
  fs::path trace;
  int disruption_ms = 0;
  fs::path out;
  std::optional<int> boundary;  // evaluate epochs after T' when given
  std::optional<Window> window;
  double hysteresis_db = 3.0;
};

struct EvalResult {
  PolicyLog log;
  nlohmann::json summary;
};

/// Throws CompatibilityError when the checkpoint cannot read this trace.
void check_compatible(const nn::Checkpoint& ck, const Trace& trace, int stack_depth);
EvalResult cmd_eval(const EvalArgs& a, const std::vector<std::string>& argv);

struct CompareArgs {
  fs::path trace;
  std::vector<fs::path> multi;   // one per T_dis, or one for all
  std::vector<fs::path> single;  // idem
  std::vector<int> disruption_ms = {0, 60, 120};
  fs::path out;
  std::optional<int> boundary;
  std::optional<Window> window;
  double hysteresis_db = 3.0;
};

nlohmann::json cmd_compare(const CompareArgs& a, const std::vector<std::string>& argv);

struct OracleArgs {
  fs::path trace;
  int disruption_ms = 0;
  fs::path out;
  std::optional<int> boundary;
};

OracleResult cmd_oracle(const OracleArgs& a, const std::vector<std::string>& argv);

/// Prints the violation report; returns true when the trace is valid.
bool cmd_validate(const fs::path& trace, std::ostream& os);

/// Evaluate one method on a segment (the building block of eval/compare).
PolicyLog run_method(const std::string& method, const nn::Checkpoint* ck, const Trace& segment,
                     const ProcessConfig& pcfg, double hysteresis_db);

}  // namespace camho
