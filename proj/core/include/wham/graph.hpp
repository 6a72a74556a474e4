#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "wham/errors.hpp"

namespace wham {

using Bytes = std::int64_t;
using Count = std::int64_t;

enum class OpKind { Gemm, Conv, Vector, Fused };
enum class Pass { Forward, Backward, Update, Loss };
enum class CoreAffinity { Tensor, Vector, Both };

const char* to_string(OpKind k);
const char* to_string(Pass p);
const char* to_string(CoreAffinity a);

// Reduction-form dims: an (M,N,K) operator produces an MxN output by
// reducing over K. CONV arrives already im2col-lowered to this form.
struct TensorShape {
  Count m = 1;
  Count n = 1;
  Count k = 1;
};

struct Operator {
  std::string id;
  OpKind kind = OpKind::Gemm;
  Pass pass = Pass::Forward;
  CoreAffinity affinity = CoreAffinity::Tensor;
  std::optional<TensorShape> shape;  // GEMM/CONV and the tensor half of FUSED
  std::optional<Count> elements;     // VECTOR and the vector half of FUSED
  Bytes param_bytes = 0;
  Bytes activation_bytes = 0;
  // Bytes crossing the interconnect for collective ops (allreduce inserted by
  // tensor-model splits), already scaled by the ring factor. 0 for compute ops.
  Bytes comm_bytes = 0;

  bool needs_tensor_core() const {
    return affinity == CoreAffinity::Tensor || affinity == CoreAffinity::Both;
  }
  bool needs_vector_core() const {
    return affinity == CoreAffinity::Vector || affinity == CoreAffinity::Both;
  }
};

// A validated DAG of operators. Immutable after construction; construction
// checks referential integrity, acyclicity, kind/affinity consistency and
// shape positivity, throwing the matching error type.
class OperatorGraph {
 public:
  using Edge = std::pair<std::string, std::string>;  // (src id, dst id)

  OperatorGraph() = default;
  OperatorGraph(std::string name, std::vector<Operator> ops,
                std::vector<Edge> edges, Count batch_size = 1);

  const std::string& name() const { return name_; }
  Count batch_size() const { return batch_size_; }
  const std::vector<Operator>& operators() const { return ops_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t size() const { return ops_.size(); }

  bool has_op(std::string_view id) const;
  const Operator& op(std::string_view id) const;
  std::size_t index_of(std::string_view id) const;

  const std::vector<std::size_t>& predecessors(std::size_t idx) const {
    return preds_[idx];
  }
  const std::vector<std::size_t>& successors(std::size_t idx) const {
    return succs_[idx];
  }

  // Deterministic topological order: every edge goes forward in the list,
  // ties broken by lexicographic op id.
  std::vector<std::string> topological_order() const;
  std::vector<std::size_t> topological_order_indices() const;

 private:
  void validate() const;
  void build_adjacency();

  std::string name_;
  Count batch_size_ = 1;
  std::vector<Operator> ops_;
  std::vector<Edge> edges_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::size_t>> preds_;
  std::vector<std::vector<std::size_t>> succs_;
};

// Backward/update counterparts of one forward operator.
struct MirrorEntry {
  std::string grad_act;                    // activation-gradient op
  std::optional<std::string> grad_weight;  // present iff param_bytes > 0
  std::optional<std::string> update;       // present iff param_bytes > 0
  std::vector<std::string> extra;          // counterparts merged in by fusion
};

// Full training graph: forward subgraph, loss, backward mirror and parameter
// updates. stash_bytes totals the forward activations retained for the
// backward pass: every forward activation is consumed there, either by the
// mirrors of its consumers or, for graph sinks, by the loss gradient.
struct TrainingGraph {
  OperatorGraph graph;
  std::map<std::string, MirrorEntry> mirror_map;  // forward id -> counterparts
  Bytes stash_bytes = 0;
};

struct SynthesisOptions {
  Bytes element_bytes = 2;  // bf16 optimizer elements
};

// Synthesize the training graph from a forward-only graph: a LOSS node after
// all forward sinks, one activation-gradient mirror per forward op with
// reversed dataflow edges, plus a weight-gradient and an UPDATE op for every
// parameterized op. Throws NonForwardInputError if any non-FORWARD op is
// present.
//
// Backward shapes follow matmul transpose calculus: the activation gradient
// of (M,N,K) is (M,K,N) and the weight gradient is (K,N,M). UPDATE ops are
// element-wise over param_bytes / element_bytes elements.
TrainingGraph build_training_graph(const OperatorGraph& fwd,
                                   const SynthesisOptions& opts = {});

// Fuse every (GEMM|CONV) -> VECTOR edge where the producer has exactly one
// successor and the consumer exactly one predecessor, both ops in the same
// pass. The fused op runs on both core types; it keeps the tensor dims and
// element count of its constituents and the vector op's activation bytes.
// LOSS, UPDATE and collective ops never fuse.
TrainingGraph apply_fusion(const TrainingGraph& g);

}  // namespace wham
