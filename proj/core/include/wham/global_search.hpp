#pragma once

#include "wham/dim_search.hpp"
#include "wham/pipeline.hpp"

namespace wham {

enum class PlanMode { Common, Individual, Mosaic };
const char* to_string(PlanMode m);

// One end-to-end pipeline configuration for one model.
struct PipelinePlan {
  std::string model;
  PlanMode mode = PlanMode::Individual;
  std::vector<DesignPoint> designs;  // per stage; identical for C/I modes
  std::vector<double> stage_time_s;  // fwd+bwd microbatch time per stage
  std::vector<double> comm_time_s;   // boundary transfer per adjacent pair
  double iteration_time_s = 0.0;
  double throughput = 0.0;  // samples/s, data-parallel replicas included
  double total_tdp_w = 0.0;
  double perf_per_tdp = 0.0;
  double metric = kNegInf;  // per MetricSpec, end to end
};

struct GlobalOptions {
  SearchEngine engine = SearchEngine::Heuristic;
  bool prune_local = true;   // dimension pruner inside each stage search
  bool prune_global = true;  // top-level candidate tree
  TraceSink trace;
  SolveLimits ilp_limits{};
  int threads = 0;  // concurrent stage searches; 0 picks one per stage
};

struct GlobalResult {
  std::map<std::string, PipelinePlan> mosaic;      // per model
  std::map<std::string, PipelinePlan> individual;  // per model
  std::map<std::string, PipelinePlan> common;      // per model, one design
  DesignPoint common_design;
  std::map<std::string, std::vector<TopK>> per_stage_topk;  // model -> stages
  SearchStats local_stats;          // aggregated over stage searches
  std::int64_t pool_size = 0;       // unique candidates (k x s x m upper)
  std::int64_t evaluated_candidates = 0;
  std::int64_t pruned_candidates = 0;
};

// Top-k composition across pipeline stages: per-stage local searches feed a
// candidate pool; MOSAIC takes each stage's top-1, INDIVIDUAL/COMMON walk
// the pool grouped by area (smallest first) as homogeneous pipelines,
// pruning once hysteresis_levels consecutive area levels improve no model.
// Model graphs must be full training graphs; tensor-model splits and
// partitioning happen inside.
GlobalResult global_search(const std::vector<Workload>& models,
                           const PipelineParams& pp, const SystemConfig& cfg,
                           const MetricSpec& metric, int k,
                           const GlobalOptions& opts = {});

// Plan assembly for one model and one per-stage design assignment; exposed
// for the acceptance suite's bottleneck scenarios.
PipelinePlan evaluate_plan(const std::string& model, PlanMode mode,
                           const StagePartition& partition,
                           const std::vector<DesignPoint>& designs,
                           const PipelineParams& pp, const SystemConfig& cfg,
                           const MetricSpec& metric);

}  // namespace wham
