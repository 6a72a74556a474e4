#pragma once

#include <map>

#include "wham/arch.hpp"
#include "wham/graph.hpp"
#include "wham/pipeline_params.hpp"

namespace wham {

using Cycles = std::int64_t;

struct OpCost {
  Cycles latency_cycles = 1;
  double energy_j = 0.0;
  CoreAffinity core = CoreAffinity::Tensor;
  Cycles compute_cycles = 0;  // roofline compute leg
  Cycles memory_cycles = 0;   // roofline memory/interconnect leg
  Bytes moved_bytes = 0;
};

// Training graph with per-op latency and energy for one core dimensionality.
struct AnnotatedGraph {
  TrainingGraph training;
  CoreDims dims;
  std::map<std::string, OpCost> costs;

  const OperatorGraph& graph() const { return training.graph; }
  Cycles latency(std::string_view id) const {
    return costs.at(std::string(id)).latency_cycles;
  }
  Cycles serial_cycles() const;  // sum of all latencies
  double total_energy_j() const;
};

// Latency/energy of a single operator in isolation (input traffic derived
// from the op's own shape). Compute legs:
//   GEMM/CONV  ceil(M/rows) * ceil(N/cols) * (K + rows + cols - 1)
//              (output-stationary systolic fill/drain per tile)
//   VECTOR     ceil(elements/width)
//   FUSED      max of the two legs, which overlap on the two cores
// Latency is the roofline max of compute and HBM traffic; collectives use
// the interconnect instead of HBM.
OpCost estimate_op(const Operator& op, const CoreDims& dims,
                   const SystemConfig& cfg);

// Costs every op, applying the data-reuse discount: when a producer has
// exactly one consumer, the intermediate tensor stays on chip and its HBM
// round trip is removed from both sides. Deterministic.
AnnotatedGraph annotate(const TrainingGraph& g, const CoreDims& dims,
                        const SystemConfig& cfg);

// Per-accelerator training footprint: weights + optimizer state + gradients
// + stashed activations times the scheme's in-flight microbatch count.
Bytes training_memory_footprint(const TrainingGraph& g,
                                const PipelineParams& pipeline,
                                const SystemConfig& cfg,
                                Count stage_index = 0);

}  // namespace wham
