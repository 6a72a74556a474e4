#include "wham/graph.hpp"

#include <algorithm>
#include <queue>
#include <set>

namespace wham {

const char* to_string(OpKind k) {
  switch (k) {
    case OpKind::Gemm: return "gemm";
    case OpKind::Conv: return "conv";
    case OpKind::Vector: return "vector";
    case OpKind::Fused: return "fused";
  }
  return "?";
}

const char* to_string(Pass p) {
  switch (p) {
    case Pass::Forward: return "forward";
    case Pass::Backward: return "backward";
    case Pass::Update: return "update";
    case Pass::Loss: return "loss";
  }
  return "?";
}

const char* to_string(CoreAffinity a) {
  switch (a) {
    case CoreAffinity::Tensor: return "tensor";
    case CoreAffinity::Vector: return "vector";
    case CoreAffinity::Both: return "both";
  }
  return "?";
}

OperatorGraph::OperatorGraph(std::string name, std::vector<Operator> ops,
                             std::vector<Edge> edges, Count batch_size)
    : name_(std::move(name)),
      batch_size_(batch_size),
      ops_(std::move(ops)),
      edges_(std::move(edges)) {
  index_.reserve(ops_.size());
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    auto [it, inserted] = index_.emplace(ops_[i].id, i);
    if (!inserted) {
      throw ParseError("duplicate operator id '" + ops_[i].id + "'");
    }
  }
  validate();
  build_adjacency();
  // Acyclicity: Kahn over the adjacency must reach every op.
  if (topological_order_indices().size() != ops_.size()) {
    throw CycleError("operator graph '" + name_ + "' contains a cycle");
  }
}

void OperatorGraph::validate() const {
  if (batch_size_ < 1) {
    throw ParseError("batch_size must be >= 1");
  }
  for (const Operator& op : ops_) {
    if (op.id.empty()) {
      throw ParseError("operator with empty id");
    }
    switch (op.kind) {
      case OpKind::Gemm:
      case OpKind::Conv:
        if (op.affinity == CoreAffinity::Vector) {
          throw AffinityError("op '" + op.id +
                              "': tensor-kind op with vector affinity");
        }
        if (!op.shape) {
          throw ParseError("op '" + op.id + "': missing (m,n,k) shape");
        }
        break;
      case OpKind::Vector:
        if (op.affinity != CoreAffinity::Vector) {
          throw AffinityError("op '" + op.id +
                              "': vector op must have vector affinity");
        }
        if (!op.elements) {
          throw ParseError("op '" + op.id + "': missing element count");
        }
        break;
      case OpKind::Fused:
        if (op.affinity != CoreAffinity::Both) {
          throw AffinityError("op '" + op.id +
                              "': fused op must have both-core affinity");
        }
        if (!op.shape || !op.elements) {
          throw ParseError("op '" + op.id +
                           "': fused op needs tensor dims and element count");
        }
        break;
    }
    if (op.shape &&
        (op.shape->m < 1 || op.shape->n < 1 || op.shape->k < 1)) {
      throw ParseError("op '" + op.id + "': shape dims must be >= 1");
    }
    if (op.elements && *op.elements < 1) {
      throw ParseError("op '" + op.id + "': element count must be >= 1");
    }
    if (op.param_bytes < 0 || op.activation_bytes < 0 || op.comm_bytes < 0) {
      throw ParseError("op '" + op.id + "': negative byte count");
    }
  }
  for (const Edge& e : edges_) {
    if (!index_.count(e.first)) {
      throw UnknownNodeError("edge references unknown op '" + e.first + "'");
    }
    if (!index_.count(e.second)) {
      throw UnknownNodeError("edge references unknown op '" + e.second + "'");
    }
    if (e.first == e.second) {
      throw CycleError("self-edge on op '" + e.first + "'");
    }
  }
}

void OperatorGraph::build_adjacency() {
  preds_.assign(ops_.size(), {});
  succs_.assign(ops_.size(), {});
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const Edge& e : edges_) {
    std::size_t u = index_.at(e.first);
    std::size_t v = index_.at(e.second);
    if (!seen.insert({u, v}).second) {
      continue;  // ignore duplicate edges
    }
    succs_[u].push_back(v);
    preds_[v].push_back(u);
  }
  auto by_id = [this](std::size_t a, std::size_t b) {
    return ops_[a].id < ops_[b].id;
  };
  for (auto& vec : preds_) std::sort(vec.begin(), vec.end(), by_id);
  for (auto& vec : succs_) std::sort(vec.begin(), vec.end(), by_id);
}

bool OperatorGraph::has_op(std::string_view id) const {
  return index_.count(std::string(id)) > 0;
}

const Operator& OperatorGraph::op(std::string_view id) const {
  return ops_[index_of(id)];
}

std::size_t OperatorGraph::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) {
    throw UnknownNodeError("unknown op '" + std::string(id) + "'");
  }
  return it->second;
}

std::vector<std::size_t> OperatorGraph::topological_order_indices() const {
  std::vector<std::size_t> indegree(ops_.size(), 0);
  for (std::size_t v = 0; v < ops_.size(); ++v) {
    indegree[v] = preds_[v].size();
  }
  auto cmp = [this](std::size_t a, std::size_t b) {
    return ops_[a].id > ops_[b].id;  // min-heap on id
  };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(cmp)>
      ready(cmp);
  for (std::size_t v = 0; v < ops_.size(); ++v) {
    if (indegree[v] == 0) ready.push(v);
  }
  std::vector<std::size_t> order;
  order.reserve(ops_.size());
  while (!ready.empty()) {
    std::size_t u = ready.top();
    ready.pop();
    order.push_back(u);
    for (std::size_t v : succs_[u]) {
      if (--indegree[v] == 0) ready.push(v);
    }
  }
  return order;
}

std::vector<std::string> OperatorGraph::topological_order() const {
  std::vector<std::string> order;
  order.reserve(ops_.size());
  for (std::size_t i : topological_order_indices()) {
    order.push_back(ops_[i].id);
  }
  return order;
}

namespace {

std::string grad_id(const std::string& id) { return id + ".grad"; }
std::string gradw_id(const std::string& id) { return id + ".gradw"; }
std::string update_id(const std::string& id) { return id + ".update"; }

Operator make_grad_act(const Operator& fwd, Bytes element_bytes) {
  Operator g;
  g.id = grad_id(fwd.id);
  g.kind = fwd.kind;
  g.pass = Pass::Backward;
  g.affinity = fwd.affinity;
  g.param_bytes = fwd.param_bytes;  // reads the weights
  g.comm_bytes = fwd.comm_bytes;    // collective mirrors are collectives
  if (fwd.shape) {
    // d(input) of (M,N,K) is (M,K,N): output gradient times transposed weights.
    g.shape = TensorShape{fwd.shape->m, fwd.shape->k, fwd.shape->n};
    g.activation_bytes = fwd.shape->m * fwd.shape->k * element_bytes;
  }
  if (fwd.elements) {
    g.elements = fwd.elements;
    if (!fwd.shape) g.activation_bytes = fwd.activation_bytes;
  }
  return g;
}

Operator make_grad_weight(const Operator& fwd, Bytes element_bytes) {
  Operator g;
  g.id = gradw_id(fwd.id);
  g.kind = fwd.kind == OpKind::Vector ? OpKind::Vector : fwd.kind;
  g.pass = Pass::Backward;
  g.affinity = fwd.affinity;
  g.param_bytes = fwd.param_bytes;            // writes the weight gradient
  g.activation_bytes = fwd.param_bytes;       // gradient is weight-sized
  if (fwd.shape) {
    // dW of (M,N,K) is (K,N,M): transposed input times output gradient.
    g.shape = TensorShape{fwd.shape->k, fwd.shape->n, fwd.shape->m};
  }
  if (fwd.elements) {
    g.elements = std::max<Count>(1, fwd.param_bytes / element_bytes);
    if (!fwd.shape) g.kind = OpKind::Vector;
  }
  return g;
}

Operator make_update(const Operator& fwd, Bytes element_bytes) {
  Operator u;
  u.id = update_id(fwd.id);
  u.kind = OpKind::Vector;
  u.pass = Pass::Update;
  u.affinity = CoreAffinity::Vector;
  u.elements = std::max<Count>(1, fwd.param_bytes / element_bytes);
  u.param_bytes = fwd.param_bytes;
  u.activation_bytes = 0;  // updates weights in place
  return u;
}

}  // namespace

TrainingGraph build_training_graph(const OperatorGraph& fwd,
                                   const SynthesisOptions& opts) {
  for (const Operator& op : fwd.operators()) {
    if (op.pass != Pass::Forward) {
      throw NonForwardInputError("op '" + op.id + "' is " +
                                 to_string(op.pass) +
                                 "; synthesis expects a forward-only graph");
    }
  }

  TrainingGraph out;
  if (fwd.size() == 0) {
    out.graph = fwd;
    return out;
  }

  std::vector<Operator> ops = fwd.operators();
  std::vector<OperatorGraph::Edge> edges = fwd.edges();

  const std::string loss_name = "loss";
  if (fwd.has_op(loss_name)) {
    throw ParseError("op id 'loss' is reserved for the synthesized loss node");
  }

  Operator loss;
  loss.id = loss_name;
  loss.kind = OpKind::Vector;
  loss.pass = Pass::Loss;
  loss.affinity = CoreAffinity::Vector;
  loss.elements = fwd.batch_size();
  loss.activation_bytes = fwd.batch_size() * opts.element_bytes;
  ops.push_back(loss);

  // Forward sinks feed the loss; the loss feeds their gradient mirrors.
  std::vector<std::string> sinks;
  for (std::size_t i = 0; i < fwd.size(); ++i) {
    if (fwd.successors(i).empty()) sinks.push_back(fwd.operators()[i].id);
  }
  std::sort(sinks.begin(), sinks.end());

  for (const Operator& op : fwd.operators()) {
    MirrorEntry entry;
    ops.push_back(make_grad_act(op, opts.element_bytes));
    entry.grad_act = grad_id(op.id);
    if (op.param_bytes > 0) {
      ops.push_back(make_grad_weight(op, opts.element_bytes));
      ops.push_back(make_update(op, opts.element_bytes));
      entry.grad_weight = gradw_id(op.id);
      entry.update = update_id(op.id);
      edges.emplace_back(gradw_id(op.id), update_id(op.id));
    }
    out.mirror_map.emplace(op.id, std::move(entry));
  }

  for (const std::string& sink : sinks) {
    edges.emplace_back(sink, loss_name);
    edges.emplace_back(loss_name, grad_id(sink));
    if (fwd.op(sink).param_bytes > 0) {
      edges.emplace_back(loss_name, gradw_id(sink));
    }
  }

  // Each forward edge (u,v) mirrors to (grad(v), grad(u)); the incoming
  // gradient of u also feeds u's weight-gradient op.
  for (const auto& [src, dst] : fwd.edges()) {
    edges.emplace_back(grad_id(dst), grad_id(src));
    if (fwd.op(src).param_bytes > 0) {
      edges.emplace_back(grad_id(dst), gradw_id(src));
    }
  }

  for (const Operator& op : fwd.operators()) {
    out.stash_bytes += op.activation_bytes;
  }
  out.graph = OperatorGraph(fwd.name(), std::move(ops), std::move(edges),
                            fwd.batch_size());
  return out;
}

TrainingGraph apply_fusion(const TrainingGraph& g) {
  const OperatorGraph& og = g.graph;
  const auto& ops = og.operators();

  // Candidate pairs are vertex-disjoint: the producer has a single successor
  // and the consumer a single predecessor, both within the same pass.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<bool> fused_away(ops.size(), false);
  for (std::size_t u : og.topological_order_indices()) {
    const Operator& producer = ops[u];
    if (producer.kind != OpKind::Gemm && producer.kind != OpKind::Conv) {
      continue;
    }
    if (og.successors(u).size() != 1) continue;
    std::size_t v = og.successors(u)[0];
    const Operator& consumer = ops[v];
    if (consumer.kind != OpKind::Vector) continue;
    if (consumer.pass != producer.pass) continue;  // keeps LOSS/UPDATE intact
    if (consumer.comm_bytes != 0) continue;        // collectives never fuse
    if (og.predecessors(v).size() != 1) continue;
    if (fused_away[u] || fused_away[v]) continue;
    pairs.emplace_back(u, v);
    fused_away[u] = fused_away[v] = true;
  }
  if (pairs.empty()) return g;

  std::unordered_map<std::string, std::string> renamed;  // old id -> fused id
  std::vector<Operator> new_ops;
  std::vector<OperatorGraph::Edge> new_edges;

  std::vector<std::optional<Operator>> fused_for(ops.size());
  for (auto [u, v] : pairs) {
    Operator f;
    f.id = ops[u].id + "+" + ops[v].id;
    f.kind = OpKind::Fused;
    f.pass = ops[u].pass;
    f.affinity = CoreAffinity::Both;
    f.shape = ops[u].shape;
    f.elements = ops[v].elements;
    f.param_bytes = ops[u].param_bytes + ops[v].param_bytes;
    f.activation_bytes = ops[v].activation_bytes;
    renamed[ops[u].id] = f.id;
    renamed[ops[v].id] = f.id;
    fused_for[u] = std::move(f);
  }

  for (std::size_t i = 0; i < ops.size(); ++i) {
    if (fused_for[i]) {
      new_ops.push_back(*fused_for[i]);
    } else if (!fused_away[i]) {
      new_ops.push_back(ops[i]);
    }
  }
  auto resolve = [&renamed](const std::string& id) {
    auto it = renamed.find(id);
    return it == renamed.end() ? id : it->second;
  };
  std::set<OperatorGraph::Edge> edge_set;
  for (const auto& [src, dst] : og.edges()) {
    std::string s = resolve(src);
    std::string d = resolve(dst);
    if (s == d) continue;  // the fused-pair edge itself
    if (edge_set.insert({s, d}).second) {
      new_edges.emplace_back(std::move(s), std::move(d));
    }
  }

  TrainingGraph out;
  out.graph = OperatorGraph(og.name(), std::move(new_ops),
                            std::move(new_edges), og.batch_size());

  // Re-point mirror entries at fused ids. A fused forward pair collapses to
  // one entry anchored on the tensor-side constituent; the vector side's
  // counterparts land in `extra`.
  std::set<std::string> merged_fwd;
  for (auto [u, v] : pairs) {
    if (ops[u].pass != Pass::Forward) continue;
    merged_fwd.insert(ops[u].id);
    merged_fwd.insert(ops[v].id);
    const MirrorEntry& tensor_side = g.mirror_map.at(ops[u].id);
    const MirrorEntry& vector_side = g.mirror_map.at(ops[v].id);
    MirrorEntry merged;
    merged.grad_act = resolve(tensor_side.grad_act);
    if (tensor_side.grad_weight) {
      merged.grad_weight = resolve(*tensor_side.grad_weight);
    }
    merged.update = tensor_side.update;
    if (std::string vg = resolve(vector_side.grad_act); vg != merged.grad_act) {
      merged.extra.push_back(std::move(vg));
    }
    if (vector_side.grad_weight) {
      merged.extra.push_back(resolve(*vector_side.grad_weight));
    }
    if (vector_side.update) merged.extra.push_back(*vector_side.update);
    out.mirror_map.emplace(renamed.at(ops[u].id), std::move(merged));
  }
  for (const auto& [fwd_id, entry] : g.mirror_map) {
    if (merged_fwd.count(fwd_id)) continue;
    MirrorEntry e = entry;
    e.grad_act = resolve(e.grad_act);
    if (e.grad_weight) e.grad_weight = resolve(*e.grad_weight);
    out.mirror_map.emplace(fwd_id, std::move(e));
  }

  for (const Operator& op : out.graph.operators()) {
    if (op.pass == Pass::Forward) out.stash_bytes += op.activation_bytes;
  }
  return out;
}

}  // namespace wham
