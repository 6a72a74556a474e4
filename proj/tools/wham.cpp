// Command-line front end: accelerator search for DNN training workloads.

#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wham/driver.hpp"
#include "wham/version.hpp"

namespace {

struct CommonArgs {
  std::vector<std::string> graphs;
  std::string system;
  std::string metric = "throughput";
  double min_throughput = 0.0;
  std::string engine = "heuristic";
  int k = 10;
  std::string out = ".";
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--graph", args.graphs, "workload graph file (repeatable)")
      ->required();
  cmd->add_option("--system", args.system, "system config JSON");
  cmd->add_option("--metric", args.metric, "throughput|perf-tdp")
      ->check(CLI::IsMember({"throughput", "perf-tdp"}));
  cmd->add_option("--min-throughput", args.min_throughput,
                  "floor for perf-tdp runs (samples/s)");
  cmd->add_option("--engine", args.engine, "heuristic|ilp")
      ->check(CLI::IsMember({"heuristic", "ilp"}));
  cmd->add_option("--k", args.k, "top-k designs to keep")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--out", args.out, "output directory");
}

wham::RunManifest to_manifest(const CommonArgs& args) {
  wham::RunManifest m;
  for (const std::string& g : args.graphs) m.graph_paths.emplace_back(g);
  m.system_path = args.system;
  m.metric.objective = args.metric == "perf-tdp"
                           ? wham::Objective::PerfPerTdp
                           : wham::Objective::Throughput;
  m.metric.min_throughput = args.min_throughput;
  m.engine = args.engine == "ilp" ? wham::SearchEngine::Ilp
                                  : wham::SearchEngine::Heuristic;
  m.k = args.k;
  m.out_dir = args.out;
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"accelerator design-space search for DNN training"};
  app.set_version_flag("--version", wham::kVersion);
  app.require_subcommand(1);

  // local-search
  CommonArgs local_args;
  CLI::App* local = app.add_subcommand(
      "local-search", "search one accelerator for one or more workloads");
  add_common(local, local_args);

  // global-search
  CommonArgs global_args;
  int depth = 1;
  std::string scheme = "gpipe";
  int microbatches = 1;
  int tmp_width = 1;
  CLI::App* global = app.add_subcommand(
      "global-search", "search designs across pipeline stages");
  add_common(global, global_args);
  global->add_option("--depth", depth, "pipeline depth")
      ->check(CLI::PositiveNumber);
  global->add_option("--scheme", scheme, "gpipe|pipedream")
      ->check(CLI::IsMember({"gpipe", "pipedream"}));
  global->add_option("--microbatches", microbatches,
                     "microbatches per iteration")
      ->check(CLI::PositiveNumber);
  global->add_option("--tmp-width", tmp_width, "tensor-model-parallel width")
      ->check(CLI::PositiveNumber);

  // estimate
  std::string est_graph, est_system, est_out = ".";
  int est_rows = 256, est_cols = 256, est_width = 256;
  CLI::App* estimate = app.add_subcommand(
      "estimate", "annotate a workload with latency/energy at fixed dims");
  estimate->add_option("--graph", est_graph, "workload graph file")
      ->required();
  estimate->add_option("--system", est_system, "system config JSON");
  estimate->add_option("--tc-rows", est_rows, "tensor core rows");
  estimate->add_option("--tc-cols", est_cols, "tensor core cols");
  estimate->add_option("--vc-width", est_width, "vector core width");
  estimate->add_option("--out", est_out, "output directory");

  // schedule
  std::string sch_graph, sch_system, sch_out = ".", sch_engine = "heuristic";
  std::string sch_dump_lp;
  int sch_rows = 256, sch_cols = 256, sch_width = 256;
  int sch_tc = 0, sch_vc = 0, sch_tmp = 1;
  CLI::App* schedule = app.add_subcommand(
      "schedule", "emit an operator schedule at fixed dims");
  schedule->add_option("--graph", sch_graph, "workload graph file")
      ->required();
  schedule->add_option("--system", sch_system, "system config JSON");
  schedule->add_option("--tc-rows", sch_rows, "tensor core rows");
  schedule->add_option("--tc-cols", sch_cols, "tensor core cols");
  schedule->add_option("--vc-width", sch_width, "vector core width");
  schedule->add_option("--num-tc", sch_tc,
                       "tensor core count (0: let the engine pick)");
  schedule->add_option("--num-vc", sch_vc,
                       "vector core count (0: let the engine pick)");
  schedule->add_option("--engine", sch_engine, "heuristic|ilp")
      ->check(CLI::IsMember({"heuristic", "ilp"}));
  schedule->add_option("--tmp-width", sch_tmp, "tensor-model-parallel width");
  schedule->add_option("--dump-lp", sch_dump_lp,
                       "write the time-indexed program in LP format");
  schedule->add_option("--out", sch_out, "output directory");

  // validate
  std::string val_schedule, val_graph, val_system;
  CLI::App* validate = app.add_subcommand(
      "validate", "check a schedule file against its graph");
  validate->add_option("--schedule", val_schedule, "schedule JSON")
      ->required();
  validate->add_option("--graph", val_graph, "workload graph file")
      ->required();
  validate->add_option("--system", val_system, "system config JSON");

  CLI11_PARSE(app, argc, argv);

  if (local->parsed()) {
    return wham::cmd_local(to_manifest(local_args));
  }
  if (global->parsed()) {
    wham::RunManifest m = to_manifest(global_args);
    m.pipeline.depth = depth;
    m.pipeline.scheme = scheme == "pipedream"
                            ? wham::PipelineScheme::PipeDream
                            : wham::PipelineScheme::GPipe;
    m.pipeline.num_microbatches = microbatches;
    m.pipeline.tmp_width = tmp_width;
    return wham::cmd_global(m);
  }
  if (estimate->parsed()) {
    wham::EstimateRequest req;
    req.graph_path = est_graph;
    req.system_path = est_system;
    req.dims = wham::CoreDims{est_rows, est_cols, est_width};
    req.out_dir = est_out;
    return wham::cmd_estimate(req);
  }
  if (schedule->parsed()) {
    wham::ScheduleRequest req;
    req.graph_path = sch_graph;
    req.system_path = sch_system;
    req.dims = wham::CoreDims{sch_rows, sch_cols, sch_width};
    if (sch_tc > 0) req.num_tc = sch_tc;
    if (sch_vc > 0) req.num_vc = sch_vc;
    req.engine = sch_engine == "ilp" ? wham::SearchEngine::Ilp
                                     : wham::SearchEngine::Heuristic;
    req.tmp_width = sch_tmp;
    req.dump_lp = sch_dump_lp;
    req.out_dir = sch_out;
    return wham::cmd_schedule(req);
  }
  if (validate->parsed()) {
    return wham::cmd_validate(val_schedule, val_graph, val_system);
  }
  return wham::kExitInputError;
}
