#include "camho/harness.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "camho/error.hpp"
#include "camho/scenario.hpp"

namespace camho {

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const CompatibilityError*>(&e)) return kCompatibilityError;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const FormatError*>(&e) ||
      dynamic_cast<const InvalidArgument*>(&e) || dynamic_cast<const InsufficientData*>(&e))
    return kInputError;
  return kInternalError;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 failed");
  std::ostringstream os;
  for (unsigned int k = 0; k < len; ++k) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[k]);
  return os.str();
}

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw FormatError("cannot read " + p.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

constexpr const char* kRunManifest = "run_manifest.json";

}  // namespace

std::string content_hash(const fs::path& path) {
  if (fs::is_regular_file(path)) {
    const std::string bytes = read_file(path);
    return sha256_hex("blob " + std::to_string(bytes.size()) + '\0' + bytes);
  }
  if (!fs::is_directory(path)) throw FormatError("no such file or directory: " + path.string());
  std::vector<std::string> lines;
  for (const auto& e : fs::recursive_directory_iterator(path)) {
    if (!e.is_regular_file() || e.path().filename() == kRunManifest) continue;
    lines.push_back(content_hash(e.path()) + " " + fs::relative(e.path(), path).generic_string() + "\n");
  }
  std::sort(lines.begin(), lines.end(), [](const std::string& a, const std::string& b) {
    return a.substr(65) < b.substr(65);
  });
  std::string joined;
  for (const auto& l : lines) joined += l;
  return sha256_hex("tree " + std::to_string(joined.size()) + '\0' + joined);
}

void RunManifest::add_input(const fs::path& p) { inputs.emplace_back(p.string(), content_hash(p)); }
void RunManifest::add_output(const fs::path& p) { outputs.emplace_back(p.string(), content_hash(p)); }

nlohmann::json RunManifest::to_json() const {
  auto pairs = [](const auto& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& [path, hash] : v) a.push_back({{"path", path}, {"sha256", hash}});
    return a;
  };
  nlohmann::json j = {{"command", command},        {"argv", argv},          {"config", config},
                      {"inputs", pairs(inputs)},   {"outputs", pairs(outputs)},
                      {"started_utc", started_utc}, {"finished_utc", finished_utc}};
  j["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
  for (const auto& [k, v] : extra.items()) j[k] = v;
  return j;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw FormatError("cannot write " + path.string());
  f << j.dump(2) << "\n";
  if (!f) throw FormatError("write failed: " + path.string());
}

nlohmann::json read_json_file(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

Window parse_window(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw ConfigError("window must be 't0,t1', got '" + text + "'");
  Window w;
  try {
    std::size_t used = 0;
    w.t0 = std::stoi(text.substr(0, comma), &used);
    w.t1 = std::stoi(text.substr(comma + 1), &used);
  } catch (const std::exception&) {
    throw ConfigError("window must be 't0,t1', got '" + text + "'");
  }
  if (w.t1 < w.t0) throw ConfigError("window end precedes its start");
  return w;
}

// ---------------------------------------------------------------------------
// synth

std::vector<DipSummary> dip_summary(const SceneConfig& scene) {
  const int J = static_cast<int>(scene.base_stations.size());
  std::vector<DipSummary> out(J);
  std::vector<bool> was(J, false);
  for (int j = 0; j < J; ++j) out[j].bs = j + 1;
  for (int t = 0; t < scene.duration_epochs; ++t) {
    std::vector<Vec2> points;
    for (const auto& path : scene.pedestrians)
      if (auto p = pedestrian_position(path, t, scene.epoch_interval_ms)) points.push_back(*p);
    for (int j = 0; j < J; ++j) {
      const bool dip = blockage_attenuation_db(scene, points, j + 1) > 1.0;
      if (dip) {
        ++out[j].blocked_epochs;
        if (!was[j]) ++out[j].intervals;
      }
      was[j] = dip;
    }
  }
  return out;
}

SynthResult cmd_synth(const SynthArgs& a, const std::vector<std::string>& argv) {
  RunManifest m;
  m.command = "synth";
  m.argv = argv;
  m.started_utc = utc_now();
  SceneConfig scene = reference_scenario();
  if (a.scene) {
    scene = scene_from_json(read_json_file(*a.scene));
    m.add_input(*a.scene);
  }
  if (a.seed) scene.seed = *a.seed;
  scene.validate();
  const RawTrace raw = synthesize_raw_trace(scene);
  fs::create_directories(a.out);
  write_raw_trace_dir(raw, a.out);

  SynthResult r;
  r.length = raw.length;
  r.dips = dip_summary(scene);
  r.hash = content_hash(a.out);
  m.config = scene_to_json(scene);
  m.seed = scene.seed;
  m.outputs.emplace_back(a.out.string(), r.hash);
  m.finished_utc = utc_now();
  write_json(m.to_json(), a.out / kRunManifest);
  return r;
}

// ---------------------------------------------------------------------------
// train

SplitSpec default_split(const Trace& trace, std::optional<int> boundary) {
  return {boundary ? *boundary : trace.length() * 2 / 3};
}

namespace {

void write_history_csv(const std::vector<HistoryRow>& rows, const fs::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw FormatError("cannot write " + path.string());
  f << "iteration,epsilon,eval_avg_bps\n";
  for (const auto& r : rows) f << r.iteration << ',' << format_double(r.epsilon) << ',' << format_double(r.eval_avg_bps) << "\n";
  if (!f) throw FormatError("write failed: " + path.string());
}

}  // namespace

TrainResult cmd_train(const TrainArgs& a, const std::vector<std::string>& argv) {
  RunManifest m;
  m.command = "train";
  m.argv = argv;
  m.started_utc = utc_now();
  const Trace trace = load_trace_dir(a.trace);
  m.add_input(a.trace);
  TrainConfig cfg;
  if (a.config) {
    cfg = train_config_from_json(read_json_file(*a.config));
    m.add_input(*a.config);
  }
  if (a.seed) cfg.seed = *a.seed;
  if (a.disruption_ms) cfg.disruption_ms = *a.disruption_ms;
  if (a.single_camera) cfg.single_camera = *a.single_camera;
  if (a.iterations) cfg.iterations = *a.iterations;
  cfg.validate();
  const SplitSpec sp = default_split(trace, a.boundary);

  ProgressFn progress;
  if (!a.quiet)
    progress = [](const HistoryRow& h, const IterationStats& st) {
      std::cerr << "iteration " << h.iteration << " epsilon " << h.epsilon << " eval_avg_bps " << h.eval_avg_bps
                << " loss " << st.mean_loss << "\n";
    };
  const TrainResult r = train(trace, sp, cfg, progress);

  fs::create_directories(a.out);
  const fs::path ck = a.out / "best.ckpt", hist = a.out / "history.csv";
  nn::write_checkpoint(r.best, ck);
  write_history_csv(r.history, hist);
  m.config = train_config_to_json(cfg);
  m.config["boundary"] = sp.boundary;
  m.seed = cfg.seed;
  m.add_output(ck);
  m.add_output(hist);
  m.extra["best_iteration"] = r.best_iteration;
  m.extra["best_eval_avg_bps"] = r.best_eval_avg_bps;
  m.extra["encoder_channels"] = r.best.arch.in_channels;
  m.extra["cameras"] = r.best.metadata["cameras"];
  m.extra["eval_history_bps"] = [&] {
    nlohmann::json h = nlohmann::json::array();
    for (const auto& row : r.history) h.push_back(row.eval_avg_bps);
    return h;
  }();
  m.finished_utc = utc_now();
  write_json(m.to_json(), a.out / kRunManifest);
  return r;
}

// ---------------------------------------------------------------------------
// eval / compare / oracle

Baseline baseline_from_string(const std::string& s) {
  if (s == "static1" || s == "static-bs1") return Baseline::static1;
  if (s == "static2" || s == "static-bs2") return Baseline::static2;
  if (s == "reactive") return Baseline::reactive;
  if (s == "oracle" || s == "dp-oracle") return Baseline::oracle;
  throw ConfigError("unknown baseline '" + s + "' (static1, static2, reactive, oracle)");
}

void check_compatible(const nn::Checkpoint& ck, const Trace& trace, int stack_depth) {
  const auto& md = ck.metadata;
  std::vector<std::string> problems;
  auto want = [&](const char* what, long long expected, long long got) {
    if (expected != got)
      problems.push_back(std::string(what) + ": checkpoint " + std::to_string(expected) + ", trace " + std::to_string(got));
  };
  const auto cams = md.value("cameras", std::vector<int>{});
  const int max_cam = cams.empty() ? 0 : *std::max_element(cams.begin(), cams.end());
  if (max_cam > trace.num_cameras())
    problems.push_back("cameras: checkpoint reads camera " + std::to_string(max_cam) + ", trace has " +
                       std::to_string(trace.num_cameras()));
  want("base stations", md.value("num_bs", -1), trace.num_bs());
  want("frame width", md.value("frame_width", -1), trace.frame_width());
  want("frame height", md.value("frame_height", -1), trace.frame_height());
  want("image channels", ck.arch.in_channels, static_cast<long long>(cams.size()) * stack_depth);
  want("outputs", ck.arch.outputs, trace.num_bs());
  want("side features", ck.arch.side_features, trace.num_bs() + 1);
  if (!problems.empty()) {
    std::string msg = "checkpoint is incompatible with the trace:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw CompatibilityError(msg);
  }
}

namespace {

int checkpoint_stack_depth(const nn::Checkpoint& ck) { return ck.metadata.value("stack_depth", 2); }

ProcessConfig eval_process_config(const Trace& trace, int stack_depth, int disruption_ms) {
  ProcessConfig p;
  p.num_cameras = trace.num_cameras();
  p.num_bs = trace.num_bs();
  p.stack_depth = stack_depth;
  p.epoch_interval_ms = trace.epoch_interval_ms();
  p.disruption_ms = disruption_ms;
  p.validate();
  return p;
}

Trace eval_segment(const Trace& trace, std::optional<int> boundary) {
  if (!boundary) return trace;
  return split(trace, {*boundary}).second;
}

nlohmann::json log_summary(const std::string& method, const PolicyLog& log, int disruption_ms,
                           const std::optional<Window>& window) {
  nlohmann::json j = {{"method", method},
                      {"disruption_ms", disruption_ms},
                      {"average_bps", log.average_bps},
                      {"handovers", log.handovers},
                      {"epochs", log.steps.size()}};
  if (window) {
    j["window"] = {window->t0, window->t1};
    j["window_average_bps"] = window_average(log, window->t0, window->t1);
  }
  return j;
}

std::string method_name(Baseline b) {
  switch (b) {
    case Baseline::static1: return "static-bs1";
    case Baseline::static2: return "static-bs2";
    case Baseline::reactive: return "reactive";
    case Baseline::oracle: return "dp-oracle";
    default: return "checkpoint";
  }
}

}  // namespace

PolicyLog run_method(const std::string& method, const nn::Checkpoint* ck, const Trace& segment,
                     const ProcessConfig& pcfg, double hysteresis_db) {
  if (method == "static-bs1") return rollout(segment, pcfg, static_policy(1));
  if (method == "static-bs2") return rollout(segment, pcfg, static_policy(2));
  if (method == "reactive") return rollout(segment, pcfg, reactive_policy(hysteresis_db));
  if (method == "dp-oracle") return dp_oracle(segment, pcfg).log;
  if (!ck) throw InvalidArgument("method '" + method + "' needs a checkpoint");
  const nn::Network net(ck->arch);
  const auto cams = ck->metadata.value("cameras", std::vector<int>{});
  return evaluate_policy(net, ck->params, segment, pcfg, cams);
}

EvalResult cmd_eval(const EvalArgs& a, const std::vector<std::string>& argv) {
  RunManifest m;
  m.command = "eval";
  m.argv = argv;
  m.started_utc = utc_now();
  const Trace trace = load_trace_dir(a.trace);
  m.add_input(a.trace);
  std::optional<nn::Checkpoint> ck;
  int depth = 2;
  if (a.checkpoint) {
    if (a.baseline != Baseline::none) throw ConfigError("give either a checkpoint or a baseline, not both");
    ck = nn::read_checkpoint(*a.checkpoint);
    m.add_input(*a.checkpoint);
    depth = checkpoint_stack_depth(*ck);
    check_compatible(*ck, trace, depth);
  } else if (a.baseline == Baseline::none) {
    throw ConfigError("eval needs a checkpoint or a baseline");
  }
  const Trace seg = eval_segment(trace, a.boundary);
  const ProcessConfig pcfg = eval_process_config(trace, depth, a.disruption_ms);
  const std::string method = ck ? "checkpoint" : method_name(a.baseline);
  EvalResult r;
  r.log = run_method(method, ck ? &*ck : nullptr, seg, pcfg, a.hysteresis_db);
  r.summary = log_summary(method, r.log, a.disruption_ms, a.window);

  fs::create_directories(a.out);
  const fs::path csv = a.out / "policy.csv", summary = a.out / "summary.json";
  write_policy_csv(r.log, csv, &seg);
  write_json(r.summary, summary);
  m.config = {{"disruption_ms", a.disruption_ms}, {"method", method}, {"hysteresis_db", a.hysteresis_db}};
  if (a.boundary) m.config["boundary"] = *a.boundary;
  m.add_output(csv);
  m.add_output(summary);
  m.finished_utc = utc_now();
  write_json(m.to_json(), a.out / kRunManifest);
  return r;
}

nlohmann::json cmd_compare(const CompareArgs& a, const std::vector<std::string>& argv) {
  RunManifest m;
  m.command = "compare";
  m.argv = argv;
  m.started_utc = utc_now();
  if (a.disruption_ms.empty()) throw ConfigError("compare needs at least one T_dis value");
  const Trace trace = load_trace_dir(a.trace);
  m.add_input(a.trace);

  auto load_set = [&](const std::vector<fs::path>& paths, const char* what) {
    std::vector<nn::Checkpoint> cks;
    if (!paths.empty() && paths.size() != 1 && paths.size() != a.disruption_ms.size())
      throw ConfigError(std::string("give one ") + what + " checkpoint, or one per T_dis value");
    for (const auto& p : paths) {
      cks.push_back(nn::read_checkpoint(p));
      check_compatible(cks.back(), trace, checkpoint_stack_depth(cks.back()));
      m.add_input(p);
    }
    return cks;
  };
  const auto multi = load_set(a.multi, "multi-camera");
  const auto single = load_set(a.single, "single-camera");
  int depth = 2;
  if (!multi.empty()) depth = checkpoint_stack_depth(multi[0]);
  for (const auto* set : {&multi, &single})
    for (const auto& ck : *set)
      if (checkpoint_stack_depth(ck) != depth) throw CompatibilityError("checkpoints disagree on the frame stack depth");

  const Trace seg = eval_segment(trace, a.boundary);
  std::vector<std::string> methods;
  if (!multi.empty()) methods.push_back("multi-camera");
  if (!single.empty()) methods.push_back("single-camera");
  for (const char* b : {"static-bs1", "static-bs2", "reactive", "dp-oracle"}) methods.push_back(b);

  struct Task {
    std::string method;
    std::size_t tdis_index;
    const nn::Checkpoint* ck;
    PolicyLog log;
  };
  std::vector<Task> tasks;
  for (const auto& method : methods)
    for (std::size_t k = 0; k < a.disruption_ms.size(); ++k) {
      const nn::Checkpoint* ck = nullptr;
      if (method == "multi-camera") ck = &multi[multi.size() == 1 ? 0 : k];
      if (method == "single-camera") ck = &single[single.size() == 1 ? 0 : k];
      tasks.push_back({method, k, ck, {}});
    }
  std::vector<std::exception_ptr> errors(tasks.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    try {
      const ProcessConfig pcfg = eval_process_config(trace, depth, a.disruption_ms[tasks[i].tdis_index]);
      tasks[i].log = run_method(tasks[i].method, tasks[i].ck, seg, pcfg, a.hysteresis_db);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  fs::create_directories(a.out);
  nlohmann::json report = {{"trace", a.trace.string()},
                           {"trace_sha256", m.inputs.front().second},
                           {"segment_length", seg.length()},
                           {"boundary", a.boundary ? nlohmann::json(*a.boundary) : nlohmann::json(nullptr)},
                           {"disruption_ms", a.disruption_ms}};
  nlohmann::json rows = nlohmann::json::object();
  for (const auto& t : tasks) {
    const int tdis = a.disruption_ms[t.tdis_index];
    const std::string csv = t.method + "_tdis" + std::to_string(tdis) + ".csv";
    write_policy_csv(t.log, a.out / csv, &seg);
    m.add_output(a.out / csv);
    auto row = log_summary(t.method, t.log, tdis, a.window);
    row["csv"] = csv;
    rows[t.method].push_back(row);
  }
  report["methods"] = rows;
  if (!multi.empty() && !single.empty()) {
    nlohmann::json imp = nlohmann::json::array();
    for (std::size_t k = 0; k < a.disruption_ms.size(); ++k) {
      const double mv = rows["multi-camera"][k]["average_bps"].get<double>();
      const double sv = rows["single-camera"][k]["average_bps"].get<double>();
      imp.push_back({{"disruption_ms", a.disruption_ms[k]}, {"multi_vs_single_pct", 100.0 * (mv / sv - 1.0)}});
    }
    report["improvement"] = imp;
  }
  const fs::path rp = a.out / "report.json";
  write_json(report, rp);
  m.add_output(rp);
  m.config = {{"disruption_ms", a.disruption_ms}, {"hysteresis_db", a.hysteresis_db}};
  if (a.boundary) m.config["boundary"] = *a.boundary;
  m.finished_utc = utc_now();
  write_json(m.to_json(), a.out / kRunManifest);
  return report;
}

OracleResult cmd_oracle(const OracleArgs& a, const std::vector<std::string>& argv) {
  RunManifest m;
  m.command = "oracle";
  m.argv = argv;
  m.started_utc = utc_now();
  const Trace trace = load_trace_dir(a.trace);
  m.add_input(a.trace);
  const Trace seg = eval_segment(trace, a.boundary);
  const ProcessConfig pcfg = eval_process_config(trace, 2, a.disruption_ms);
  OracleResult r = dp_oracle(seg, pcfg);
  fs::create_directories(a.out);
  const fs::path csv = a.out / "oracle.csv", summary = a.out / "summary.json";
  write_policy_csv(r.log, csv, &seg);
  auto s = log_summary("dp-oracle", r.log, a.disruption_ms, std::nullopt);
  s["total_bps"] = r.total_bps;
  write_json(s, summary);
  m.config = {{"disruption_ms", a.disruption_ms}};
  if (a.boundary) m.config["boundary"] = *a.boundary;
  m.add_output(csv);
  m.add_output(summary);
  m.finished_utc = utc_now();
  write_json(m.to_json(), a.out / kRunManifest);
  return r;
}

bool cmd_validate(const fs::path& trace, std::ostream& os) {
  const RawTrace raw = read_trace_dir(trace);
  const auto report = validate(raw);
  if (report.empty()) {
    os << "ok: " << raw.length << " epochs, " << raw.frames.size() << " cameras, " << raw.powers_dbm.size()
       << " base stations\n";
    return true;
  }
  os << format_violations(report);
  return false;
}

}  // namespace camho
