#pragma once

#include <vector>

#include "wham/cost_model.hpp"
#include "wham/pipeline_params.hpp"

namespace wham {

// Contiguous split of a model across pipeline stages. Stage graphs are full
// training graphs over their forward block; boundary bytes are the forward
// activations crossing each stage boundary (skip edges pass through every
// boundary between producer and consumer).
struct StagePartition {
  std::vector<TrainingGraph> stage_graphs;
  std::vector<Bytes> boundary_activation_bytes;  // depth - 1 entries
  std::vector<Bytes> stage_footprint_bytes;
};

// Memory-balanced splitter: greedy fill over topological layer order toward
// the mean footprint, then a local rebalance of boundary ops to minimize the
// maximum stage footprint. Stage footprints use the scheme-dependent
// in-flight stash count. Throws UnpartitionableModelError when a stage (or a
// single op) cannot fit HBM, or when there are fewer ops than stages.
StagePartition partition_model(const TrainingGraph& g,
                               const PipelineParams& pp,
                               const SystemConfig& cfg);

// Megatron-style tensor-model split: tensor ops alternate column (N/width)
// and row (K/width) sharding along topological order, weights shard with
// them, and an allreduce collective lands after every row-split op (and
// after a trailing column-split op). The graph is re-synthesized, so every
// forward collective gains its backward mirror. Apply before fusion.
// Throws IndivisibleShapeError when a split dim is not divisible by width.
TrainingGraph apply_tmp(const TrainingGraph& g, Count tmp_width,
                        const SystemConfig& cfg);

// Bottleneck closed form: t_b is the slowest stage including its adjacent
// transfers; an iteration drains m microbatches through s stages in
// (m + s - 1) * t_b for both schemes (the schemes differ in memory, not in
// steady-state bubbles).
double pipeline_iteration_time(const std::vector<double>& per_stage_time_s,
                               const std::vector<double>& comm_time_s,
                               const PipelineParams& pp);

}  // namespace wham
