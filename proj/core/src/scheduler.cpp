#include "wham/scheduler.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <sstream>

namespace wham {

namespace {

struct OpRecord {
  std::size_t idx;
  Cycles slack;
  Cycles asap;
  const std::string* id;
};

struct ReadyOrder {
  bool operator()(const OpRecord& a, const OpRecord& b) const {
    if (a.slack != b.slack) return a.slack < b.slack;
    if (a.asap != b.asap) return a.asap < b.asap;
    return *a.id < *b.id;
  }
};

}  // namespace

Schedule list_schedule(const AnnotatedGraph& ag, Count num_tc, Count num_vc,
                       const CriticalInfo* precomputed) {
  const OperatorGraph& g = ag.graph();
  const auto& ops = g.operators();

  CriticalInfo local;
  if (!precomputed) {
    local = compute_asap_alap(ag);
    precomputed = &local;
  }
  const CriticalInfo& info = *precomputed;

  for (const Operator& op : ops) {
    if (op.needs_tensor_core() && num_tc < 1) {
      throw NoCoreForAffinityError("op '" + op.id +
                                   "' needs a tensor core but num_tc=0");
    }
    if (op.needs_vector_core() && num_vc < 1) {
      throw NoCoreForAffinityError("op '" + op.id +
                                   "' needs a vector core but num_vc=0");
    }
  }

  Schedule sched;
  sched.num_tc = num_tc;
  sched.num_vc = num_vc;
  if (ops.empty()) return sched;

  std::vector<Cycles> lat(ops.size());
  std::vector<std::size_t> missing_preds(ops.size());
  for (std::size_t i = 0; i < ops.size(); ++i) {
    lat[i] = ag.costs.at(ops[i].id).latency_cycles;
    missing_preds[i] = g.predecessors(i).size();
  }

  std::vector<Cycles> tc_busy_until(static_cast<std::size_t>(num_tc), 0);
  std::vector<Cycles> vc_busy_until(static_cast<std::size_t>(num_vc), 0);
  std::set<OpRecord, ReadyOrder> ready;
  // (finish time, op) events release successors and free cores.
  std::priority_queue<std::pair<Cycles, std::size_t>,
                      std::vector<std::pair<Cycles, std::size_t>>,
                      std::greater<>>
      finishing;

  auto make_record = [&](std::size_t i) {
    return OpRecord{i, info.slack.at(ops[i].id), info.asap.at(ops[i].id),
                    &ops[i].id};
  };
  for (std::size_t i = 0; i < ops.size(); ++i) {
    if (missing_preds[i] == 0) ready.insert(make_record(i));
  }

  auto free_slot = [](std::vector<Cycles>& busy, Cycles now) {
    for (std::size_t i = 0; i < busy.size(); ++i) {
      if (busy[i] <= now) return static_cast<int>(i);
    }
    return -1;
  };

  Cycles now = 0;
  std::size_t scheduled = 0;
  while (scheduled < ops.size()) {
    // Start as many ready ops as the free cores allow, in priority order.
    for (auto it = ready.begin(); it != ready.end();) {
      const Operator& op = ops[it->idx];
      int tc = op.needs_tensor_core() ? free_slot(tc_busy_until, now) : -1;
      int vc = op.needs_vector_core() ? free_slot(vc_busy_until, now) : -1;
      bool can_run = (!op.needs_tensor_core() || tc >= 0) &&
                     (!op.needs_vector_core() || vc >= 0);
      if (!can_run) {
        ++it;
        continue;
      }
      Cycles finish = now + lat[it->idx];
      if (tc >= 0) tc_busy_until[static_cast<std::size_t>(tc)] = finish;
      if (vc >= 0) vc_busy_until[static_cast<std::size_t>(vc)] = finish;
      sched.start[op.id] = now;
      sched.core_index[op.id] = CoreSlot{tc, vc};
      sched.makespan = std::max(sched.makespan, finish);
      finishing.emplace(finish, it->idx);
      ++scheduled;
      it = ready.erase(it);
    }
    if (scheduled == ops.size()) break;

    // Advance to the next completion and release its successors.
    now = finishing.top().first;
    while (!finishing.empty() && finishing.top().first == now) {
      std::size_t done = finishing.top().second;
      finishing.pop();
      for (std::size_t succ : g.successors(done)) {
        if (--missing_preds[succ] == 0) ready.insert(make_record(succ));
      }
    }
  }
  return sched;
}

std::vector<std::string> validate_schedule(
    const OperatorGraph& g, const std::map<std::string, Cycles>& latency,
    const Schedule& s) {
  std::vector<std::string> violations;
  auto complain = [&violations](const std::string& msg) {
    violations.push_back(msg);
  };

  for (const Operator& op : g.operators()) {
    auto it = s.start.find(op.id);
    if (it == s.start.end()) {
      complain("op '" + op.id + "' has no start time");
      continue;
    }
    if (it->second < 0) complain("op '" + op.id + "' starts before cycle 0");
    if (!latency.count(op.id)) {
      complain("op '" + op.id + "' has no latency");
      continue;
    }
    auto slot = s.core_index.find(op.id);
    if (slot == s.core_index.end()) {
      complain("op '" + op.id + "' has no core assignment");
      continue;
    }
    if (op.needs_tensor_core() &&
        (slot->second.tc_index < 0 || slot->second.tc_index >= s.num_tc)) {
      complain("op '" + op.id + "' has no valid tensor-core slot");
    }
    if (op.needs_vector_core() &&
        (slot->second.vc_index < 0 || slot->second.vc_index >= s.num_vc)) {
      complain("op '" + op.id + "' has no valid vector-core slot");
    }
  }
  if (!violations.empty()) return violations;

  for (const auto& [src, dst] : g.edges()) {
    Cycles src_end = s.start.at(src) + latency.at(src);
    if (s.start.at(dst) < src_end) {
      std::ostringstream os;
      os << "precedence violated on edge (" << src << " -> " << dst
         << "): " << dst << " starts at " << s.start.at(dst) << " before "
         << src << " finishes at " << src_end;
      complain(os.str());
    }
  }

  // Occupancy: no two ops may overlap on the same physical core, and the
  // per-type concurrent load may not exceed the core counts.
  struct Interval {
    Cycles begin, end;
    const std::string* id;
  };
  std::map<std::pair<char, int>, std::vector<Interval>> per_core;
  for (const Operator& op : g.operators()) {
    Cycles begin = s.start.at(op.id);
    Cycles end = begin + latency.at(op.id);
    const CoreSlot& slot = s.core_index.at(op.id);
    if (op.needs_tensor_core()) {
      per_core[{'t', slot.tc_index}].push_back({begin, end, &op.id});
    }
    if (op.needs_vector_core()) {
      per_core[{'v', slot.vc_index}].push_back({begin, end, &op.id});
    }
  }
  for (auto& [core, intervals] : per_core) {
    std::sort(intervals.begin(), intervals.end(),
              [](const Interval& a, const Interval& b) {
                return a.begin < b.begin;
              });
    for (std::size_t i = 1; i < intervals.size(); ++i) {
      if (intervals[i].begin < intervals[i - 1].end) {
        std::ostringstream os;
        os << "ops '" << *intervals[i - 1].id << "' and '" << *intervals[i].id
           << "' overlap on " << (core.first == 't' ? "tensor" : "vector")
           << " core " << core.second;
        complain(os.str());
      }
    }
  }

  Cycles expected_makespan = 0;
  for (const Operator& op : g.operators()) {
    expected_makespan =
        std::max(expected_makespan, s.start.at(op.id) + latency.at(op.id));
  }
  if (expected_makespan != s.makespan) {
    std::ostringstream os;
    os << "makespan " << s.makespan << " != max finish time "
       << expected_makespan;
    complain(os.str());
  }
  return violations;
}

bool better_design(const EvaluatedDesign& a, const EvaluatedDesign& b) {
  if (a.metric != b.metric) return a.metric > b.metric;
  if (a.design.area_mm2 != b.design.area_mm2) {
    return a.design.area_mm2 < b.design.area_mm2;
  }
  return a.design.tuple_string() < b.design.tuple_string();
}

namespace {

// Total cycles zero-slack ops spend waiting for a busy core, per core type.
struct ConflictWait {
  Cycles tensor = 0;
  Cycles vector = 0;
};

ConflictWait measure_conflicts(const AnnotatedGraph& ag,
                               const CriticalInfo& info, const Schedule& s) {
  const OperatorGraph& g = ag.graph();
  const auto& ops = g.operators();
  ConflictWait wait;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const Operator& op = ops[i];
    if (info.slack.at(op.id) != 0) continue;
    Cycles ready = 0;
    for (std::size_t p : g.predecessors(i)) {
      ready = std::max(ready, s.start.at(ops[p].id) +
                                  ag.costs.at(ops[p].id).latency_cycles);
    }
    Cycles delayed = s.start.at(op.id) - ready;
    if (delayed <= 0) continue;
    if (op.needs_tensor_core()) wait.tensor += delayed;
    if (op.needs_vector_core()) wait.vector += delayed;
  }
  return wait;
}

}  // namespace

std::vector<EvaluatedDesign> heuristic_core_search(const AnnotatedGraph& ag,
                                                   const SystemConfig& cfg,
                                                   const MetricSpec& metric) {
  CriticalInfo info = compute_asap_alap(ag);
  ParallelismBound bound = asap_parallelism_bound(ag, info);
  Count max_tc = std::max<Count>(1, bound.tensor);
  Count max_vc = std::max<Count>(1, bound.vector);

  Count num_tc = 1;
  Count num_vc = 1;
  {
    DesignPoint first = make_design(num_tc, ag.dims, num_vc, cfg);
    if (!within_budget(first, cfg)) {
      throw InfeasibleBudgetError("design " + first.tuple_string() +
                                  " exceeds the area/power budget");
    }
  }

  Count samples = ag.graph().batch_size();
  std::vector<EvaluatedDesign> visited;
  while (true) {
    EvaluatedDesign ev;
    ev.design = make_design(num_tc, ag.dims, num_vc, cfg);
    ev.schedule = list_schedule(ag, num_tc, num_vc, &info);
    ev.makespan = ev.schedule.makespan;
    ev.throughput = throughput_samples_per_s(ev.makespan, samples, cfg);
    ev.metric = metric_value(metric, ev.makespan, samples, ev.design, cfg);
    ConflictWait wait = measure_conflicts(ag, info, ev.schedule);
    Cycles makespan = ev.makespan;
    visited.push_back(std::move(ev));

    if (makespan <= info.best_latency) break;          // (b) at the bound
    if (wait.tensor == 0 && wait.vector == 0) break;   // (a) no conflicts

    // Blame the type with the larger wait, ties toward tensor; fall back to
    // the other type when the blamed one is capped by bound or budget.
    auto try_increment = [&](bool tensor_side) {
      Count tc = num_tc + (tensor_side ? 1 : 0);
      Count vc = num_vc + (tensor_side ? 0 : 1);
      if (tensor_side && (wait.tensor == 0 || tc > max_tc)) return false;
      if (!tensor_side && (wait.vector == 0 || vc > max_vc)) return false;
      if (!within_budget(make_design(tc, ag.dims, vc, cfg), cfg)) {
        return false;  // (c) budget refuses the increment
      }
      num_tc = tc;
      num_vc = vc;
      return true;
    };
    bool tensor_first = wait.tensor >= wait.vector;
    if (!try_increment(tensor_first) && !try_increment(!tensor_first)) {
      break;  // (c)/(d) neither type can grow
    }
  }

  std::sort(visited.begin(), visited.end(), better_design);
  return visited;
}

}  // namespace wham
