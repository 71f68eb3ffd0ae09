#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "cli/commands.hpp"

namespace {

using namespace softtopk;
using namespace softtopk::cli;

SinkhornMode parse_mode(const std::string& name) {
  if (name == "plain") return SinkhornMode::kPlain;
  if (name == "log") return SinkhornMode::kLog;
  return SinkhornMode::kAuto;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Entropic-transport smoothed top-k operators"};
  app.require_subcommand(1);

  // ---- topk ----
  TopkCmdOptions topk_opts;
  std::string mode = "auto";
  std::string format = "jsonl";
  double tol = 0.0;
  std::uint64_t seed = 0;
  auto* topk = app.add_subcommand(
      "topk", "Smoothed (sorted) top-k over stdin records, JSONL out");
  topk->add_option("--k", topk_opts.k, "selection size (records may override)");
  topk->add_option("--epsilon", topk_opts.solver.epsilon,
                   "entropy regularization")->capture_default_str();
  topk->add_option("--max-iter", topk_opts.solver.max_iter,
                   "iteration budget")->capture_default_str();
  topk->add_option("--mode", mode, "plain|log|auto")->capture_default_str();
  topk->add_option("--normalize-cost", topk_opts.solver.normalize_cost,
                   "divide the cost by its max entry")->capture_default_str();
  topk->add_option("--tol", tol, "early-stop feasibility tolerance");
  topk->add_flag("--sorted", topk_opts.sorted, "rank-membership output");
  topk->add_flag("--largest", topk_opts.largest, "select the largest scores");
  topk->add_option("--format", format, "input format: jsonl|csv")
      ->capture_default_str();
  topk->add_option("--seed", seed, "unused here; accepted for uniformity");

  // ---- grad-check ----
  GradCheckCmdOptions gc_opts;
  auto* gc = app.add_subcommand("grad-check",
                                "Analytic-vs-numeric gradient sweep, CSV out");
  gc->add_option("--n", gc_opts.n)->capture_default_str();
  gc->add_option("--k", gc_opts.k)->capture_default_str();
  gc->add_option("--epsilons", gc_opts.epsilons, "epsilon grid")
      ->delimiter(',')->capture_default_str();
  gc->add_option("--seeds", gc_opts.seeds, "instances per epsilon")
      ->capture_default_str();
  gc->add_option("--seed", gc_opts.base_seed, "base seed")
      ->capture_default_str();
  gc->add_option("--threshold", gc_opts.threshold,
                 "fail when any max_rel_err exceeds this")
      ->capture_default_str();
  gc->add_option("--max-iter", gc_opts.max_iter)->capture_default_str();
  gc->add_option("--tol", gc_opts.tol)->capture_default_str();

  // ---- bias-scan ----
  BiasScanCmdOptions bias_opts;
  auto* bias = app.add_subcommand(
      "bias-scan", "Entropic bias against the theoretical bound, CSV out");
  bias->add_option("--n", bias_opts.n)->capture_default_str();
  bias->add_option("--k", bias_opts.k)->capture_default_str();
  bias->add_option("--epsilons", bias_opts.epsilons)
      ->delimiter(',')->capture_default_str();
  bias->add_option("--trials", bias_opts.trials)->capture_default_str();
  bias->add_option("--seed", bias_opts.seed)->capture_default_str();
  bias->add_option("--min-gap", bias_opts.min_gap,
                   "skip instances with a smaller boundary gap")
      ->capture_default_str();
  bias->add_option("--max-iter", bias_opts.max_iter)->capture_default_str();

  // ---- bench ----
  BenchConfig bench_cfg;
  auto* bench = app.add_subcommand("bench", "Forward/backward timing, CSV out");
  bench->add_option("--n", bench_cfg.sizes, "instance sizes")
      ->delimiter(',')->capture_default_str();
  bench->add_option("--k", bench_cfg.k)->capture_default_str();
  bench->add_option("--epsilon", bench_cfg.epsilon)->capture_default_str();
  bench->add_option("--iters", bench_cfg.iters, "fixed Sinkhorn budget")
      ->capture_default_str();
  bench->add_option("--repeats", bench_cfg.repeats)->capture_default_str();
  bench->add_option("--seed", bench_cfg.seed)->capture_default_str();
  bench->add_flag("--sorted", bench_cfg.sorted);

  // ---- knn-demo ----
  KnnDemoConfig demo_cfg;
  auto* demo = app.add_subcommand(
      "knn-demo", "Train a linear feature map through the operator");
  demo->add_option("--seed", demo_cfg.seed)->capture_default_str();
  demo->add_option("--k", demo_cfg.k)->capture_default_str();
  demo->add_option("--epsilon", demo_cfg.epsilon)->capture_default_str();
  demo->add_option("--steps", demo_cfg.steps)->capture_default_str();
  demo->add_option("--lr", demo_cfg.lr)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitBadInput;
  }

  try {
    if (topk->parsed()) {
      topk_opts.solver.mode = parse_mode(mode);
      if (tol > 0.0) topk_opts.solver.residual_tol = tol;
      topk_opts.format =
          format == "csv" ? InputFormat::kCsv : InputFormat::kJsonl;
      return cmd_topk(std::cin, std::cout, std::cerr, topk_opts);
    }
    if (gc->parsed()) return cmd_grad_check(std::cout, std::cerr, gc_opts);
    if (bias->parsed()) return cmd_bias_scan(std::cout, std::cerr, bias_opts);
    if (bench->parsed()) {
      return cmd_bench(std::cout, std::cerr, bench_cfg, bench_cfg.k);
    }
    if (demo->parsed()) return cmd_knn_demo(std::cout, std::cerr, demo_cfg);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return kExitBadInput;
  }
  return kExitOk;
}
