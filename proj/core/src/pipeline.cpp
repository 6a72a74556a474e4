#include "wham/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace wham {

namespace {

struct FwdOp {
  const Operator* op;
  Bytes weight;  // stage-independent footprint share
};

Bytes param_footprint(const Operator& op, const SystemConfig& cfg) {
  double per_param = 2.0 + cfg.cost.optimizer_state_multiplier;
  return static_cast<Bytes>(
      std::llround(per_param * static_cast<double>(op.param_bytes)));
}

}  // namespace

StagePartition partition_model(const TrainingGraph& g,
                               const PipelineParams& pp,
                               const SystemConfig& cfg) {
  pp.validate();
  const OperatorGraph& og = g.graph;
  const Count s = pp.depth;

  std::vector<std::string> fwd_order;
  for (const std::string& id : og.topological_order()) {
    if (og.op(id).pass == Pass::Forward) fwd_order.push_back(id);
  }
  if (static_cast<Count>(fwd_order.size()) < s) {
    std::ostringstream os;
    os << "model has " << fwd_order.size() << " forward ops but the pipeline "
       << "needs " << s << " nonempty stages";
    throw UnpartitionableModelError(os.str());
  }

  const Count worst_in_flight = pp.in_flight_microbatches(0);
  std::vector<FwdOp> ops;
  Bytes total_weight = 0;
  for (const std::string& id : fwd_order) {
    const Operator& op = og.op(id);
    Bytes w = param_footprint(op, cfg) + op.activation_bytes * worst_in_flight;
    if (param_footprint(op, cfg) + op.activation_bytes > cfg.hbm_bytes) {
      throw UnpartitionableModelError("op '" + id +
                                      "' alone exceeds HBM capacity");
    }
    ops.push_back({&op, w});
    total_weight += w;
  }

  // Greedy fill toward the mean weight, each stage nonempty.
  std::vector<std::size_t> stage_of(ops.size(), 0);
  double target = static_cast<double>(total_weight) / static_cast<double>(s);
  std::size_t op_idx = 0;
  for (Count stage = 0; stage < s; ++stage) {
    std::size_t stages_left = static_cast<std::size_t>(s - stage - 1);
    double cum = 0.0;
    bool first = true;
    while (op_idx < ops.size() && ops.size() - op_idx > stages_left) {
      double w = static_cast<double>(ops[op_idx].weight);
      if (!first && cum + w > target) break;
      stage_of[op_idx] = static_cast<std::size_t>(stage);
      cum += w;
      ++op_idx;
      first = false;
    }
  }
  for (; op_idx < ops.size(); ++op_idx) {
    stage_of[op_idx] = static_cast<std::size_t>(s - 1);
  }

  // Exact per-stage footprint under the scheme's in-flight count.
  auto footprints = [&](const std::vector<std::size_t>& assign) {
    std::vector<Bytes> f(static_cast<std::size_t>(s), 0);
    for (std::size_t i = 0; i < ops.size(); ++i) {
      std::size_t st = assign[i];
      f[st] += param_footprint(*ops[i].op, cfg) +
               ops[i].op->activation_bytes *
                   pp.in_flight_microbatches(static_cast<Count>(st));
    }
    return f;
  };

  // Rebalance: shift boundary ops while the max footprint strictly drops.
  std::vector<Bytes> fp = footprints(stage_of);
  auto stage_begin = [&](std::size_t st) {
    std::size_t i = 0;
    while (i < ops.size() && stage_of[i] != st) ++i;
    return i;
  };
  auto stage_size = [&](std::size_t st) {
    return static_cast<std::size_t>(
        std::count(stage_of.begin(), stage_of.end(), st));
  };
  bool moved = true;
  std::size_t guard = ops.size() * static_cast<std::size_t>(s) * 4 + 16;
  while (moved && guard-- > 0) {
    moved = false;
    Bytes worst = *std::max_element(fp.begin(), fp.end());
    for (std::size_t st = 0; st < static_cast<std::size_t>(s); ++st) {
      if (fp[st] != worst) continue;
      std::size_t begin = stage_begin(st);
      std::size_t size = stage_size(st);
      if (size <= 1) continue;
      // Try shifting this stage's first op left, then its last op right.
      if (st > 0) {
        stage_of[begin] = st - 1;
        std::vector<Bytes> cand = footprints(stage_of);
        if (*std::max_element(cand.begin(), cand.end()) < worst) {
          fp = std::move(cand);
          moved = true;
          break;
        }
        stage_of[begin] = st;
      }
      if (st + 1 < static_cast<std::size_t>(s)) {
        stage_of[begin + size - 1] = st + 1;
        std::vector<Bytes> cand = footprints(stage_of);
        if (*std::max_element(cand.begin(), cand.end()) < worst) {
          fp = std::move(cand);
          moved = true;
          break;
        }
        stage_of[begin + size - 1] = st;
      }
    }
  }

  for (Count st = 0; st < s; ++st) {
    if (fp[static_cast<std::size_t>(st)] > cfg.hbm_bytes) {
      std::ostringstream os;
      os << "stage " << st << " needs " << fp[static_cast<std::size_t>(st)]
         << " bytes but HBM holds " << cfg.hbm_bytes;
      throw UnpartitionableModelError(os.str());
    }
  }

  // Assemble per-stage forward subgraphs and synthesize their training
  // graphs; stage batch is the microbatch.
  StagePartition part;
  std::map<std::string, std::size_t> stage_by_id;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    stage_by_id[ops[i].op->id] = stage_of[i];
  }
  SynthesisOptions synth{cfg.element_bytes};
  for (std::size_t st = 0; st < static_cast<std::size_t>(s); ++st) {
    std::vector<Operator> stage_ops;
    for (std::size_t i = 0; i < ops.size(); ++i) {
      if (stage_of[i] == st) stage_ops.push_back(*ops[i].op);
    }
    std::vector<OperatorGraph::Edge> stage_edges;
    for (const auto& [src, dst] : og.edges()) {
      auto a = stage_by_id.find(src);
      auto b = stage_by_id.find(dst);
      if (a != stage_by_id.end() && b != stage_by_id.end() &&
          a->second == st && b->second == st) {
        stage_edges.emplace_back(src, dst);
      }
    }
    std::ostringstream name;
    name << og.name() << "#stage" << st;
    OperatorGraph stage_fwd(name.str(), std::move(stage_ops),
                            std::move(stage_edges), pp.microbatch_size);
    part.stage_graphs.push_back(build_training_graph(stage_fwd, synth));
  }

  part.boundary_activation_bytes.assign(static_cast<std::size_t>(s - 1), 0);
  for (std::size_t i = 0; i < ops.size(); ++i) {
    std::size_t last_consumer = stage_of[i];
    std::size_t gi = og.index_of(ops[i].op->id);
    for (std::size_t succ : og.successors(gi)) {
      const Operator& sop = og.operators()[succ];
      if (sop.pass != Pass::Forward) continue;
      last_consumer = std::max(last_consumer, stage_by_id.at(sop.id));
    }
    for (std::size_t b = stage_of[i]; b < last_consumer; ++b) {
      part.boundary_activation_bytes[b] += ops[i].op->activation_bytes;
    }
  }
  part.stage_footprint_bytes = fp;
  return part;
}

TrainingGraph apply_tmp(const TrainingGraph& g, Count tmp_width,
                        const SystemConfig& cfg) {
  if (tmp_width == 1) return g;
  if (tmp_width < 1 || (tmp_width & (tmp_width - 1)) != 0) {
    throw ParseError("tmp width must be a power of 2");
  }
  const OperatorGraph& og = g.graph;
  const Count w = tmp_width;

  std::vector<Operator> fwd_ops;
  std::vector<OperatorGraph::Edge> fwd_edges;
  std::map<std::string, std::size_t> pos;
  for (const std::string& id : og.topological_order()) {
    const Operator& op = og.op(id);
    if (op.pass != Pass::Forward) continue;
    pos[id] = fwd_ops.size();
    fwd_ops.push_back(op);
  }
  for (const auto& [src, dst] : og.edges()) {
    if (pos.count(src) && pos.count(dst)) fwd_edges.emplace_back(src, dst);
  }

  // Alternate column (N) and row (K) sharding over tensor ops in
  // topological order.
  std::vector<std::size_t> split_ops;
  for (std::size_t i = 0; i < fwd_ops.size(); ++i) {
    if (fwd_ops[i].shape) split_ops.push_back(i);
  }
  std::set<std::size_t> needs_allreduce;
  std::vector<Bytes> original_activation(fwd_ops.size(), 0);
  for (std::size_t si = 0; si < split_ops.size(); ++si) {
    Operator& op = fwd_ops[split_ops[si]];
    original_activation[split_ops[si]] = op.activation_bytes;
    bool column = si % 2 == 0;
    Count dim = column ? op.shape->n : op.shape->k;
    if (dim % w != 0) {
      std::ostringstream os;
      os << "op '" << op.id << "': " << (column ? "N" : "K") << "=" << dim
         << " is not divisible by tmp width " << w;
      throw IndivisibleShapeError(os.str());
    }
    if (column) {
      op.shape->n = dim / w;
      op.activation_bytes /= w;  // output is sharded until gathered
    } else {
      op.shape->k = dim / w;  // partial sums keep the full output size
      needs_allreduce.insert(split_ops[si]);
    }
    op.param_bytes /= w;
  }
  if (!split_ops.empty() && split_ops.size() % 2 == 1) {
    // Trailing column-split op: its sharded output must still be gathered.
    needs_allreduce.insert(split_ops.back());
  }

  std::vector<Operator> out_ops = fwd_ops;
  std::vector<OperatorGraph::Edge> out_edges;
  std::set<std::string> reduced;
  for (std::size_t i : needs_allreduce) {
    const Operator& src = fwd_ops[i];
    Bytes full = original_activation[i];
    Operator ar;
    ar.id = src.id + ".allreduce";
    ar.kind = OpKind::Vector;
    ar.pass = Pass::Forward;
    ar.affinity = CoreAffinity::Vector;
    ar.elements = std::max<Count>(1, full / cfg.element_bytes);
    ar.activation_bytes = full;
    ar.comm_bytes = static_cast<Bytes>(std::llround(
        2.0 * static_cast<double>(w - 1) / static_cast<double>(w) *
        static_cast<double>(full)));
    out_ops.push_back(std::move(ar));
    reduced.insert(src.id);
  }
  for (const auto& [src, dst] : fwd_edges) {
    out_edges.emplace_back(reduced.count(src) ? src + ".allreduce" : src, dst);
  }
  for (const std::string& id : reduced) {
    out_edges.emplace_back(id, id + ".allreduce");
  }

  OperatorGraph split_fwd(og.name(), std::move(out_ops), std::move(out_edges),
                          og.batch_size());
  return build_training_graph(split_fwd, SynthesisOptions{cfg.element_bytes});
}

double pipeline_iteration_time(const std::vector<double>& per_stage_time_s,
                               const std::vector<double>& comm_time_s,
                               const PipelineParams& pp) {
  const std::size_t s = per_stage_time_s.size();
  if (s == 0) throw ParseError("pipeline needs at least one stage");
  if (comm_time_s.size() + 1 != s) {
    throw ParseError("expected one comm entry per stage boundary");
  }
  double bottleneck = 0.0;
  for (std::size_t i = 0; i < s; ++i) {
    double t = per_stage_time_s[i];
    if (i > 0) t += comm_time_s[i - 1];
    if (i + 1 < s) t += comm_time_s[i];
    bottleneck = std::max(bottleneck, t);
  }
  double m = static_cast<double>(pp.num_microbatches);
  return (m + static_cast<double>(s) - 1.0) * bottleneck;
}

}  // namespace wham
