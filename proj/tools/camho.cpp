// Command-line front end: synth | train | eval | compare | oracle | validate.

#include <iostream>

#include "CLI11.hpp"
#include "camho/error.hpp"
#include "camho/harness.hpp"

using namespace camho;

namespace {

std::optional<Window> window_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_window(s);
}

template <class T>
std::optional<T> opt_if(const CLI::Option* o, const T& v) {
  return o->count() ? std::optional<T>(v) : std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Camera-assisted proactive handover: synthesis, training, evaluation"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Synthesize a trace directory from a scene");
  std::string scene_path, synth_out;
  std::uint64_t synth_seed = 0;
  auto* synth_scene_opt = synth->add_option("--scene", scene_path, "Scene JSON (default: reference scenario)");
  synth->add_option("--out", synth_out, "Output trace directory")->required();
  auto* synth_seed_opt = synth->add_option("--seed", synth_seed, "Override the scene seed");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a Q-network on a trace");
  TrainArgs ta;
  std::string train_trace, train_cfg, train_out;
  std::uint64_t train_seed = 0;
  int boundary = 0, tdis = 0, single = 0, iterations = 0;
  train_cmd->add_option("--trace", train_trace, "Trace directory")->required();
  auto* cfg_opt = train_cmd->add_option("--config", train_cfg, "Training config JSON");
  train_cmd->add_option("--out", train_out, "Output directory")->required();
  auto* seed_opt = train_cmd->add_option("--seed", train_seed, "Override the config seed");
  auto* boundary_opt = train_cmd->add_option("--boundary", boundary, "Last training epoch T' (default 2T/3)");
  auto* tdis_opt = train_cmd->add_option("--tdis", tdis, "Service disruption time in ms");
  auto* single_opt = train_cmd->add_option("--single-camera", single, "Use only this camera (1-based)");
  auto* iter_opt = train_cmd->add_option("--iterations", iterations, "Override the iteration count");
  train_cmd->add_flag("--quiet", ta.quiet, "No per-iteration progress");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Greedy rollout of a checkpoint or baseline");
  EvalArgs ea;
  std::string eval_ckpt, eval_baseline, eval_trace, eval_out, eval_window;
  int eval_boundary = 0;
  auto* ckpt_opt = eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint file");
  auto* base_opt = eval_cmd->add_option("--baseline", eval_baseline, "static1 | static2 | reactive | oracle");
  eval_cmd->add_option("--trace", eval_trace, "Trace directory")->required();
  eval_cmd->add_option("--tdis", ea.disruption_ms, "Service disruption time in ms");
  eval_cmd->add_option("--out", eval_out, "Output directory")->required();
  auto* eval_boundary_opt = eval_cmd->add_option("--boundary", eval_boundary, "Evaluate epochs after T'");
  eval_cmd->add_option("--window", eval_window, "Also average decision epochs t0,t1");
  eval_cmd->add_option("--hysteresis", ea.hysteresis_db, "Reactive baseline hysteresis in dB");

  // compare
  auto* cmp = app.add_subcommand("compare", "Evaluate every method at every T_dis");
  CompareArgs ca;
  std::string cmp_trace, cmp_out, cmp_window;
  std::vector<std::string> cmp_multi, cmp_single;
  int cmp_boundary = 0;
  cmp->add_option("--trace", cmp_trace, "Trace directory")->required();
  cmp->add_option("--multi", cmp_multi, "Multi-camera checkpoint(s), one per T_dis or one for all");
  cmp->add_option("--single", cmp_single, "Single-camera checkpoint(s)");
  cmp->add_option("--tdis", ca.disruption_ms, "T_dis values in ms (default 0 60 120)");
  cmp->add_option("--out", cmp_out, "Output directory")->required();
  auto* cmp_boundary_opt = cmp->add_option("--boundary", cmp_boundary, "Evaluate epochs after T' (default 2T/3)");
  cmp->add_option("--window", cmp_window, "Also average decision epochs t0,t1");
  cmp->add_option("--hysteresis", ca.hysteresis_db, "Reactive baseline hysteresis in dB");

  // oracle
  auto* orc = app.add_subcommand("oracle", "Offline optimal policy by backward induction");
  OracleArgs oa;
  std::string orc_trace, orc_out;
  int orc_boundary = 0;
  orc->add_option("--trace", orc_trace, "Trace directory")->required();
  orc->add_option("--tdis", oa.disruption_ms, "Service disruption time in ms");
  orc->add_option("--out", orc_out, "Output directory")->required();
  auto* orc_boundary_opt = orc->add_option("--boundary", orc_boundary, "Evaluate epochs after T'");

  // validate
  auto* val = app.add_subcommand("validate", "Check a trace directory");
  std::string val_trace;
  val->add_option("trace", val_trace, "Trace directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInputError;
  }

  try {
    if (synth->parsed()) {
      SynthArgs sa;
      if (synth_scene_opt->count()) sa.scene = scene_path;
      sa.out = synth_out;
      sa.seed = opt_if(synth_seed_opt, synth_seed);
      const auto r = cmd_synth(sa, args);
      std::cout << "wrote " << sa.out.string() << ": T = " << r.length << " epochs\n";
      for (const auto& d : r.dips)
        std::cout << "  BS" << d.bs << ": " << d.intervals << " dip intervals, " << d.blocked_epochs
                  << " blocked epochs\n";
      std::cout << "  sha256 " << r.hash << "\n";
    } else if (train_cmd->parsed()) {
      ta.trace = train_trace;
      if (cfg_opt->count()) ta.config = train_cfg;
      ta.out = train_out;
      ta.seed = opt_if(seed_opt, train_seed);
      ta.boundary = opt_if(boundary_opt, boundary);
      ta.disruption_ms = opt_if(tdis_opt, tdis);
      ta.single_camera = opt_if(single_opt, single);
      ta.iterations = opt_if(iter_opt, iterations);
      const auto r = cmd_train(ta, args);
      std::cout << "best iteration " << r.best_iteration << ": eval average " << r.best_eval_avg_bps
                << " bit/s (" << r.best.arch.in_channels << " image channels)\n";
    } else if (eval_cmd->parsed()) {
      if (ckpt_opt->count()) ea.checkpoint = eval_ckpt;
      if (base_opt->count()) ea.baseline = baseline_from_string(eval_baseline);
      ea.trace = eval_trace;
      ea.out = eval_out;
      ea.boundary = opt_if(eval_boundary_opt, eval_boundary);
      ea.window = window_opt(eval_window);
      const auto r = cmd_eval(ea, args);
      std::cout << r.summary.dump(2) << "\n";
    } else if (cmp->parsed()) {
      ca.trace = cmp_trace;
      for (const auto& p : cmp_multi) ca.multi.emplace_back(p);
      for (const auto& p : cmp_single) ca.single.emplace_back(p);
      ca.out = cmp_out;
      if (cmp_boundary_opt->count()) {
        ca.boundary = cmp_boundary;
      } else {
        ca.boundary = default_split(load_trace_dir(ca.trace), std::nullopt).boundary;
      }
      ca.window = window_opt(cmp_window);
      const auto report = cmd_compare(ca, args);
      for (const auto& [method, rows] : report["methods"].items())
        for (const auto& row : rows)
          std::cout << method << " T_dis=" << row["disruption_ms"] << "ms: " << row["average_bps"].get<double>()
                    << " bit/s, " << row["handovers"] << " handovers\n";
      if (report.contains("improvement"))
        for (const auto& row : report["improvement"])
          std::cout << "multi vs single at T_dis=" << row["disruption_ms"] << "ms: "
                    << row["multi_vs_single_pct"].get<double>() << "%\n";
    } else if (orc->parsed()) {
      oa.trace = orc_trace;
      oa.out = orc_out;
      oa.boundary = opt_if(orc_boundary_opt, orc_boundary);
      const auto r = cmd_oracle(oa, args);
      std::cout << "oracle average " << r.average_bps << " bit/s, " << r.log.handovers << " handovers\n";
    } else if (val->parsed()) {
      return cmd_validate(val_trace, std::cout) ? kOk : kInputError;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kOk;
}
