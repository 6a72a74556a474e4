#pragma once

#include "wham/errors.hpp"
#include "wham/graph.hpp"

namespace wham {

enum class PipelineScheme { GPipe, PipeDream };

const char* to_string(PipelineScheme s);

struct PipelineParams {
  Count depth = 1;             // pipeline stages s
  PipelineScheme scheme = PipelineScheme::GPipe;
  Count num_microbatches = 1;  // m
  Count microbatch_size = 1;   // samples per microbatch
  Count tmp_width = 1;         // tensor-model-parallel width, power of 2
  Count data_parallel_replicas = 1;  // replicated pipelines, throughput x dp

  void validate() const;

  // Activation stashes concurrently alive on one stage: GPipe keeps all m
  // in flight; PipeDream stage i of s keeps s - i.
  Count in_flight_microbatches(Count stage_index) const;
};

}  // namespace wham
