#include "wham/cost_model.hpp"

#include <algorithm>
#include <cmath>

namespace wham {

const char* to_string(PipelineScheme s) {
  return s == PipelineScheme::GPipe ? "gpipe" : "pipedream";
}

void PipelineParams::validate() const {
  if (depth < 1) throw ParseError("pipeline depth must be >= 1");
  if (num_microbatches < 1) throw ParseError("microbatches must be >= 1");
  if (microbatch_size < 1) throw ParseError("microbatch size must be >= 1");
  if (data_parallel_replicas < 1) {
    throw ParseError("data-parallel replicas must be >= 1");
  }
  if (tmp_width < 1 || (tmp_width & (tmp_width - 1)) != 0) {
    throw ParseError("tmp width must be a power of 2");
  }
}

Count PipelineParams::in_flight_microbatches(Count stage_index) const {
  if (scheme == PipelineScheme::GPipe) return num_microbatches;
  return std::max<Count>(1, depth - stage_index);
}

Cycles AnnotatedGraph::serial_cycles() const {
  Cycles total = 0;
  for (const auto& [id, cost] : costs) total += cost.latency_cycles;
  return total;
}

double AnnotatedGraph::total_energy_j() const {
  double total = 0.0;
  for (const auto& [id, cost] : costs) total += cost.energy_j;
  return total;
}

namespace {

Count ceil_div(Count a, Count b) { return (a + b - 1) / b; }

Cycles tensor_compute_cycles(const TensorShape& s, const CoreDims& d) {
  return ceil_div(s.m, d.tc_rows) * ceil_div(s.n, d.tc_cols) *
         (s.k + d.tc_rows + d.tc_cols - 1);
}

Cycles vector_compute_cycles(Count elements, const CoreDims& d) {
  return ceil_div(elements, d.vc_width);
}

Bytes shape_input_bytes(const Operator& op, Bytes element_bytes) {
  if (op.shape) {
    return op.shape->m * op.shape->k * element_bytes;
  }
  return op.elements.value_or(0) * element_bytes;
}

// read/write legs of the HBM traffic; annotate() overrides these with the
// graph-aware, reuse-discounted values.
struct Traffic {
  Bytes read_in = 0;
  Bytes write_out = 0;
};

OpCost estimate_with_traffic(const Operator& op, const CoreDims& dims,
                             const SystemConfig& cfg, const Traffic& traffic) {
  OpCost cost;
  cost.core = op.affinity;

  Cycles compute = 0;
  double mac_count = 0.0;
  double vec_elements = 0.0;
  switch (op.kind) {
    case OpKind::Gemm:
    case OpKind::Conv:
      compute = tensor_compute_cycles(*op.shape, dims);
      mac_count = static_cast<double>(op.shape->m) *
                  static_cast<double>(op.shape->n) *
                  static_cast<double>(op.shape->k);
      break;
    case OpKind::Vector:
      compute = vector_compute_cycles(*op.elements, dims);
      vec_elements = static_cast<double>(*op.elements);
      break;
    case OpKind::Fused:
      compute = std::max(tensor_compute_cycles(*op.shape, dims),
                         vector_compute_cycles(*op.elements, dims));
      mac_count = static_cast<double>(op.shape->m) *
                  static_cast<double>(op.shape->n) *
                  static_cast<double>(op.shape->k);
      vec_elements = static_cast<double>(*op.elements);
      break;
  }
  cost.compute_cycles = compute;

  if (op.comm_bytes > 0) {
    // Collective: wire time on the interconnect, no HBM leg.
    cost.moved_bytes = 0;
    cost.memory_cycles = static_cast<Cycles>(
        std::ceil(static_cast<double>(op.comm_bytes) * cfg.clock_hz /
                  cfg.interconnect_bw_bytes_per_s));
    cost.energy_j = cfg.cost.e_vec * vec_elements +
                    cfg.cost.e_hbm * static_cast<double>(op.comm_bytes);
  } else {
    cost.moved_bytes = traffic.read_in + traffic.write_out + op.param_bytes;
    cost.memory_cycles = static_cast<Cycles>(
        std::ceil(static_cast<double>(cost.moved_bytes) * cfg.clock_hz /
                  cfg.hbm_bw_bytes_per_s));
    double moved = static_cast<double>(cost.moved_bytes);
    cost.energy_j = cfg.cost.e_mac * mac_count + cfg.cost.e_vec * vec_elements +
                    cfg.cost.e_hbm * moved + cfg.cost.e_sram * 2.0 * moved;
  }

  cost.latency_cycles = std::max<Cycles>(
      1, std::max(cost.compute_cycles, cost.memory_cycles));
  if (cost.energy_j <= 0.0) cost.energy_j = 1e-15;  // keep energy positive
  return cost;
}

}  // namespace

OpCost estimate_op(const Operator& op, const CoreDims& dims,
                   const SystemConfig& cfg) {
  Traffic t;
  t.read_in = shape_input_bytes(op, cfg.element_bytes);
  t.write_out = op.activation_bytes;
  return estimate_with_traffic(op, dims, cfg, t);
}

AnnotatedGraph annotate(const TrainingGraph& g, const CoreDims& dims,
                        const SystemConfig& cfg) {
  AnnotatedGraph ag;
  ag.training = g;
  ag.dims = dims;

  const OperatorGraph& og = ag.training.graph;
  const auto& ops = og.operators();
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const Operator& op = ops[i];
    Traffic t;
    if (og.predecessors(i).empty()) {
      t.read_in = shape_input_bytes(op, cfg.element_bytes);
    } else {
      for (std::size_t p : og.predecessors(i)) {
        bool reused = og.successors(p).size() == 1;
        if (!reused) t.read_in += ops[p].activation_bytes;
      }
    }
    bool write_reused = og.successors(i).size() == 1;
    t.write_out = write_reused ? 0 : op.activation_bytes;
    ag.costs.emplace(op.id, estimate_with_traffic(op, dims, cfg, t));
  }
  return ag;
}

Bytes training_memory_footprint(const TrainingGraph& g,
                                const PipelineParams& pipeline,
                                const SystemConfig& cfg, Count stage_index) {
  Bytes params = 0;
  for (const Operator& op : g.graph.operators()) {
    if (op.pass == Pass::Forward) params += op.param_bytes;
  }
  double optimizer = cfg.cost.optimizer_state_multiplier *
                     static_cast<double>(params);
  Bytes gradients = params;
  Bytes stash = g.stash_bytes * pipeline.in_flight_microbatches(stage_index);
  return params + static_cast<Bytes>(std::llround(optimizer)) + gradients +
         stash;
}

}  // namespace wham
