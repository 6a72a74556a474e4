#include "wham/critical_path.hpp"

#include <algorithm>
#include <vector>

namespace wham {

CriticalInfo compute_asap_alap(const AnnotatedGraph& ag) {
  const OperatorGraph& g = ag.graph();
  const auto& ops = g.operators();
  std::vector<std::size_t> order = g.topological_order_indices();

  std::vector<Cycles> lat(ops.size());
  for (std::size_t i = 0; i < ops.size(); ++i) {
    lat[i] = ag.costs.at(ops[i].id).latency_cycles;
  }

  CriticalInfo info;
  std::vector<Cycles> asap(ops.size(), 0);
  for (std::size_t v : order) {
    for (std::size_t u : g.predecessors(v)) {
      asap[v] = std::max(asap[v], asap[u] + lat[u]);
    }
    info.best_latency = std::max(info.best_latency, asap[v] + lat[v]);
  }

  std::vector<Cycles> alap(ops.size());
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    std::size_t v = *it;
    Cycles latest = info.best_latency;
    for (std::size_t w : g.successors(v)) {
      latest = std::min(latest, alap[w]);
    }
    alap[v] = latest - lat[v];
  }

  for (std::size_t i = 0; i < ops.size(); ++i) {
    const std::string& id = ops[i].id;
    info.asap[id] = asap[i];
    info.alap[id] = alap[i];
    info.slack[id] = alap[i] - asap[i];
    if (alap[i] == asap[i]) info.critical_ops.insert(id);
  }
  return info;
}

ParallelismBound asap_parallelism_bound(const AnnotatedGraph& ag,
                                        const CriticalInfo& info) {
  const auto& ops = ag.graph().operators();
  // Sweep the ASAP intervals: +1 at start, -1 at end, per core type.
  std::map<Cycles, std::pair<Count, Count>> delta;  // time -> (d_tensor, d_vector)
  for (const Operator& op : ops) {
    Cycles start = info.asap.at(op.id);
    Cycles end = start + ag.costs.at(op.id).latency_cycles;
    auto& d0 = delta[start];
    auto& d1 = delta[end];
    if (op.needs_tensor_core()) {
      d0.first += 1;
      d1.first -= 1;
    }
    if (op.needs_vector_core()) {
      d0.second += 1;
      d1.second -= 1;
    }
  }
  ParallelismBound bound;
  Count tensor = 0;
  Count vector = 0;
  for (const auto& [t, d] : delta) {
    tensor += d.first;
    vector += d.second;
    bound.tensor = std::max(bound.tensor, tensor);
    bound.vector = std::max(bound.vector, vector);
  }
  return bound;
}

}  // namespace wham
