#include "wham/ilp.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <sstream>

namespace wham {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Timeout: return "timeout";
  }
  return "?";
}

std::int64_t IlpInstance::variable_count() const {
  std::int64_t count = 0;
  for (const IlpOp& op : ops) {
    count += std::max<Cycles>(0, horizon_slots - op.duration_slots + 1);
  }
  return count;
}

bool IlpInstance::counts_within_budget(Count num_tc, Count num_vc) const {
  double area = static_cast<double>(num_tc) * tc_area +
                static_cast<double>(num_vc) * vc_area;
  double power = static_cast<double>(num_tc) * tc_power +
                 static_cast<double>(num_vc) * vc_power;
  return area <= area_budget + 1e-9 && power <= power_budget + 1e-9;
}

double IlpInstance::core_cost(Count num_tc, Count num_vc) const {
  double area = static_cast<double>(num_tc) * tc_area +
                static_cast<double>(num_vc) * vc_area;
  double power = static_cast<double>(num_tc) * tc_power +
                 static_cast<double>(num_vc) * vc_power;
  return area / area_budget_norm + power / power_budget_norm;
}

Cycles slot_granularity(const AnnotatedGraph& ag) {
  Cycles g = 0;
  Cycles serial = 0;
  for (const auto& [id, cost] : ag.costs) {
    g = std::gcd(g, cost.latency_cycles);
    serial += cost.latency_cycles;
  }
  if (g == 0) g = 1;
  constexpr Cycles kMaxSlots = 10'000;
  if (serial / g > kMaxSlots) {
    g = (serial + kMaxSlots - 1) / kMaxSlots;
  }
  return g;
}

IlpInstance build_instance(const AnnotatedGraph& ag, const SystemConfig& cfg,
                           Cycles horizon_slots) {
  const OperatorGraph& g = ag.graph();
  IlpInstance inst;
  inst.dims = ag.dims;
  inst.slot_cycles = slot_granularity(ag);

  std::vector<std::size_t> order = g.topological_order_indices();
  std::vector<int> position(g.size(), -1);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Operator& op = g.operators()[order[i]];
    position[order[i]] = static_cast<int>(i);
    IlpOp iop;
    iop.id = op.id;
    iop.duration_slots =
        (ag.costs.at(op.id).latency_cycles + inst.slot_cycles - 1) /
        inst.slot_cycles;
    iop.affinity = op.affinity;
    inst.ops.push_back(std::move(iop));
    inst.serial_slots += inst.ops.back().duration_slots;
  }
  for (std::size_t v = 0; v < g.size(); ++v) {
    for (std::size_t w : g.successors(v)) {
      inst.edges.emplace_back(position[v], position[w]);
    }
  }
  std::sort(inst.edges.begin(), inst.edges.end());

  // Critical path over slotted durations; edges are sorted by topological
  // source position, so one relaxation pass suffices.
  std::vector<Cycles> est(inst.ops.size(), 0);
  for (const auto& [u, v] : inst.edges) {
    est[v] = std::max(est[v], est[u] + inst.ops[u].duration_slots);
  }
  for (std::size_t i = 0; i < inst.ops.size(); ++i) {
    inst.critical_path_slots = std::max(
        inst.critical_path_slots, est[i] + inst.ops[i].duration_slots);
  }
  if (horizon_slots < inst.critical_path_slots) {
    std::ostringstream os;
    os << "horizon " << horizon_slots << " slots is below the critical path ("
       << inst.critical_path_slots << " slots)";
    throw HorizonTooSmallError(os.str());
  }
  inst.horizon_slots = horizon_slots;

  CriticalInfo info = compute_asap_alap(ag);
  ParallelismBound bound = asap_parallelism_bound(ag, info);
  inst.max_tc = std::max<Count>(1, bound.tensor);
  inst.max_vc = std::max<Count>(1, bound.vector);

  inst.tc_area = tc_unit_area(ag.dims, cfg);
  inst.vc_area = vc_unit_area(ag.dims, cfg);
  inst.tc_power = tc_unit_power(ag.dims, cfg);
  inst.vc_power = vc_unit_power(ag.dims, cfg);
  inst.area_budget = cfg.area_budget_mm2 - cfg.cost.a_fixed;
  inst.power_budget = cfg.power_budget_w - cfg.cost.p_fixed;
  inst.area_budget_norm = cfg.area_budget_mm2;
  inst.power_budget_norm = cfg.power_budget_w;
  return inst;
}

namespace {

// Exact min-makespan for pinned core counts: DFS over event times; at each
// event every capacity-feasible subset of ready ops may start, which covers
// all semi-active schedules (deliberate idling included). Pruned by the
// precomputed critical-path tails, a per-type work density bound and the
// incumbent.
class FixedCountSolver {
 public:
  FixedCountSolver(const IlpInstance& inst, Count num_tc, Count num_vc,
                   std::int64_t node_budget, Cycles stop_at)
      : inst_(inst),
        num_tc_(num_tc),
        num_vc_(num_vc),
        node_budget_(node_budget),
        stop_at_(stop_at),
        n_(inst.ops.size()) {
    preds_.resize(n_);
    succs_.resize(n_);
    for (const auto& [u, v] : inst_.edges) {
      preds_[v].push_back(u);
      succs_[u].push_back(v);
    }
    tail_.assign(n_, 0);
    for (std::size_t i = n_; i-- > 0;) {  // ops are in topological order
      Cycles best = 0;
      for (int w : succs_[i]) best = std::max(best, tail_[w]);
      tail_[i] = inst_.ops[i].duration_slots + best;
    }
    finish_.assign(n_, kUnscheduled);
    start_.assign(n_, 0);
    best_start_.assign(n_, 0);
  }

  // Returns true when a schedule with makespan <= horizon exists; the best
  // found makespan and starts are left in the accessors.
  bool run(Cycles initial_upper_bound) {
    best_makespan_ = initial_upper_bound;
    found_ = false;
    timed_out_ = false;
    dfs(0, 0);
    return found_;
  }

  Cycles best_makespan() const { return best_makespan_; }
  const std::vector<Cycles>& best_start() const { return best_start_; }
  bool timed_out() const { return timed_out_; }
  std::int64_t nodes() const { return nodes_; }

 private:
  static constexpr Cycles kUnscheduled = -1;

  bool needs_tc(std::size_t i) const {
    return inst_.ops[i].affinity != CoreAffinity::Vector;
  }
  bool needs_vc(std::size_t i) const {
    return inst_.ops[i].affinity != CoreAffinity::Tensor;
  }

  Cycles lower_bound(Cycles now) const {
    Cycles lb = now;
    // Critical-path tails over the pinned partial schedule, plus per-type
    // remaining-work density.
    std::vector<Cycles> est(n_, 0);
    Cycles tc_left = 0;
    Cycles vc_left = 0;
    for (std::size_t v = 0; v < n_; ++v) {
      if (finish_[v] != kUnscheduled) {
        lb = std::max(lb, finish_[v]);
        continue;
      }
      Cycles e = now;
      for (int u : preds_[v]) {
        Cycles ue = finish_[static_cast<std::size_t>(u)];
        e = std::max(e, ue != kUnscheduled
                            ? ue
                            : est[static_cast<std::size_t>(u)] +
                                  inst_.ops[static_cast<std::size_t>(u)]
                                      .duration_slots);
      }
      est[v] = e;
      lb = std::max(lb, e + tail_[v]);
      if (needs_tc(v)) tc_left += inst_.ops[v].duration_slots;
      if (needs_vc(v)) vc_left += inst_.ops[v].duration_slots;
    }
    if (num_tc_ > 0) lb = std::max(lb, now + (tc_left + num_tc_ - 1) / num_tc_);
    if (num_vc_ > 0) lb = std::max(lb, now + (vc_left + num_vc_ - 1) / num_vc_);
    return lb;
  }

  void dfs(Cycles now, std::size_t n_done) {
    if (timed_out_ || best_makespan_ <= stop_at_) return;
    if (++nodes_ > node_budget_) {
      timed_out_ = true;
      return;
    }
    if (n_done == n_) {
      Cycles makespan = 0;
      for (std::size_t v = 0; v < n_; ++v) {
        makespan = std::max(makespan, finish_[v]);
      }
      if (makespan < best_makespan_) {
        best_makespan_ = makespan;
        best_start_ = start_;
        found_ = true;
      }
      return;
    }
    if (lower_bound(now) >= best_makespan_) return;

    // Ops still runnable must fit the horizon from `now` on.
    Count busy_tc = 0;
    Count busy_vc = 0;
    Cycles next_finish = -1;
    for (std::size_t v = 0; v < n_; ++v) {
      if (finish_[v] == kUnscheduled) {
        if (now + inst_.ops[v].duration_slots > inst_.horizon_slots) return;
        continue;
      }
      if (finish_[v] > now) {
        if (needs_tc(v)) ++busy_tc;
        if (needs_vc(v)) ++busy_vc;
        next_finish = next_finish < 0 ? finish_[v]
                                      : std::min(next_finish, finish_[v]);
      }
    }

    std::vector<std::size_t> ready;
    for (std::size_t v = 0; v < n_; ++v) {
      if (finish_[v] != kUnscheduled) continue;
      bool ok = true;
      for (int u : preds_[v]) {
        Cycles ue = finish_[static_cast<std::size_t>(u)];
        if (ue == kUnscheduled || ue > now) {
          ok = false;
          break;
        }
      }
      if (ok) ready.push_back(v);
    }

    choose(ready, 0, now, n_done, busy_tc, busy_vc, next_finish);
  }

  // Include/exclude each ready op at the current event time, then advance to
  // the earliest finish among running ops.
  void choose(const std::vector<std::size_t>& ready, std::size_t i, Cycles now,
              std::size_t n_done, Count busy_tc, Count busy_vc,
              Cycles next_finish) {
    if (timed_out_ || best_makespan_ <= stop_at_) return;
    if (i == ready.size()) {
      bool any_running = next_finish >= 0;
      if (!any_running) return;  // idle with nothing in flight: dead branch
      dfs(next_finish, n_done);
      return;
    }
    std::size_t v = ready[i];
    Count want_tc = needs_tc(v) ? 1 : 0;
    Count want_vc = needs_vc(v) ? 1 : 0;
    if (busy_tc + want_tc <= num_tc_ && busy_vc + want_vc <= num_vc_) {
      start_[v] = now;
      finish_[v] = now + inst_.ops[v].duration_slots;
      Cycles nf = next_finish < 0 ? finish_[v]
                                  : std::min(next_finish, finish_[v]);
      choose(ready, i + 1, now, n_done + 1, busy_tc + want_tc,
             busy_vc + want_vc, nf);
      finish_[v] = kUnscheduled;
    }
    choose(ready, i + 1, now, n_done, busy_tc, busy_vc, next_finish);
  }

  const IlpInstance& inst_;
  Count num_tc_;
  Count num_vc_;
  std::int64_t node_budget_;
  Cycles stop_at_;
  std::size_t n_;
  std::vector<std::vector<int>> preds_, succs_;
  std::vector<Cycles> tail_;
  std::vector<Cycles> finish_, start_, best_start_;
  Cycles best_makespan_ = 0;
  bool found_ = false;
  bool timed_out_ = false;
  std::int64_t nodes_ = 0;
};

// Serial-order upper bound: ops one at a time in topological order.
Cycles serial_upper_bound(const IlpInstance& inst) {
  return inst.serial_slots;
}

IlpSolution solve_counts(const IlpInstance& inst, Count num_tc, Count num_vc,
                         const SolveLimits& limits, Cycles stop_at) {
  IlpSolution sol;
  sol.slot_cycles = inst.slot_cycles;
  sol.num_tc = num_tc;
  sol.num_vc = num_vc;
  if (inst.ops.empty()) {
    sol.status = SolveStatus::Optimal;
    sol.makespan_slots = 0;
    sol.core_cost = inst.core_cost(num_tc, num_vc);
    return sol;
  }
  FixedCountSolver solver(inst, num_tc, num_vc, limits.node_budget, stop_at);
  bool found = solver.run(serial_upper_bound(inst) + 1);
  sol.nodes_explored = solver.nodes();
  if (solver.timed_out()) {
    sol.status = SolveStatus::Timeout;
  } else {
    sol.status = found && solver.best_makespan() <= inst.horizon_slots
                     ? SolveStatus::Optimal
                     : SolveStatus::Infeasible;
  }
  if (found) {
    sol.makespan_slots = solver.best_makespan();
    for (std::size_t i = 0; i < inst.ops.size(); ++i) {
      sol.start_slots[inst.ops[i].id] = solver.best_start()[i];
    }
  }
  sol.core_cost = inst.core_cost(num_tc, num_vc);
  return sol;
}

}  // namespace

IlpSolution solve_fixed_counts(const IlpInstance& inst, Count num_tc,
                               Count num_vc, const SolveLimits& limits) {
  return solve_counts(inst, num_tc, num_vc, limits,
                      inst.critical_path_slots);
}

IlpSolution solve(const IlpInstance& inst, const SolveLimits& limits) {
  IlpSolution best;
  best.slot_cycles = inst.slot_cycles;
  best.status = SolveStatus::Infeasible;
  std::int64_t nodes_total = 0;
  bool timed_out = false;

  if (inst.ops.empty()) {
    best.status = SolveStatus::Optimal;
    best.num_tc = 1;
    best.num_vc = 1;
    best.core_cost = inst.core_cost(1, 1);
    return best;
  }

  bool have = false;
  for (Count tc = 1; tc <= inst.max_tc; ++tc) {
    for (Count vc = 1; vc <= inst.max_vc; ++vc) {
      if (!inst.counts_within_budget(tc, vc)) continue;
      double cost = inst.core_cost(tc, vc);
      if (have) {
        // Lexicographic pruning: costlier counts can only win on makespan,
        // and nothing beats an incumbent already at the critical path.
        if (best.makespan_slots == inst.critical_path_slots &&
            cost >= best.core_cost) {
          continue;
        }
      }
      SolveLimits remaining{limits.node_budget - nodes_total};
      if (remaining.node_budget <= 0) {
        timed_out = true;
        break;
      }
      IlpSolution sol =
          solve_counts(inst, tc, vc, remaining, inst.critical_path_slots);
      nodes_total += sol.nodes_explored;
      if (sol.status == SolveStatus::Timeout) {
        timed_out = true;
      }
      if (sol.status != SolveStatus::Optimal) continue;
      bool better = !have;
      if (have) {
        if (sol.makespan_slots != best.makespan_slots) {
          better = sol.makespan_slots < best.makespan_slots;
        } else if (sol.core_cost != best.core_cost) {
          better = sol.core_cost < best.core_cost;
        } else if (sol.num_tc != best.num_tc) {
          better = sol.num_tc < best.num_tc;
        } else {
          better = sol.num_vc < best.num_vc;
        }
      }
      if (better) {
        best = sol;
        have = true;
      }
    }
    if (timed_out) break;
  }
  best.nodes_explored = nodes_total;
  if (timed_out) {
    best.status = SolveStatus::Timeout;
  } else if (have) {
    best.status = SolveStatus::Optimal;
  }
  return best;
}

Cycles min_horizon(const AnnotatedGraph& ag, const SystemConfig& cfg,
                   const SolveLimits& limits) {
  // The slot cap keeps the serial sum under 10,000 slots, so 20,000 always
  // holds the critical path.
  IlpInstance probe = build_instance(ag, cfg, 20'000);
  Cycles lo = probe.critical_path_slots;
  Cycles hi = probe.serial_slots;
  auto feasible = [&](Cycles t) {
    IlpInstance inst = build_instance(ag, cfg, t);
    IlpSolution sol = solve(inst, limits);
    return sol.status == SolveStatus::Optimal && sol.makespan_slots <= t;
  };
  while (lo < hi) {
    Cycles mid = lo + (hi - lo) / 2;
    if (feasible(mid)) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

Schedule schedule_from_starts(const AnnotatedGraph& ag,
                              const std::map<std::string, Cycles>& start,
                              Count num_tc, Count num_vc) {
  Schedule s;
  s.num_tc = num_tc;
  s.num_vc = num_vc;
  s.start = start;

  std::vector<std::pair<Cycles, std::string>> order;
  for (const auto& [id, t] : start) order.emplace_back(t, id);
  std::sort(order.begin(), order.end());

  std::vector<Cycles> tc_free(static_cast<std::size_t>(num_tc), 0);
  std::vector<Cycles> vc_free(static_cast<std::size_t>(num_vc), 0);
  for (const auto& [t, id] : order) {
    const Operator& op = ag.graph().op(id);
    Cycles end = t + ag.costs.at(id).latency_cycles;
    CoreSlot slot;
    if (op.needs_tensor_core()) {
      for (std::size_t i = 0; i < tc_free.size(); ++i) {
        if (tc_free[i] <= t) {
          slot.tc_index = static_cast<int>(i);
          tc_free[i] = end;
          break;
        }
      }
    }
    if (op.needs_vector_core()) {
      for (std::size_t i = 0; i < vc_free.size(); ++i) {
        if (vc_free[i] <= t) {
          slot.vc_index = static_cast<int>(i);
          vc_free[i] = end;
          break;
        }
      }
    }
    s.core_index[id] = slot;
    s.makespan = std::max(s.makespan, end);
  }
  return s;
}

void write_lp_format(const IlpInstance& inst, std::ostream& os) {
  const Cycles T = inst.horizon_slots;
  auto var = [](std::size_t v, Cycles t) {
    std::ostringstream name;
    name << "y_" << v << "_" << t;
    return name.str();
  };

  os << "\\ time-indexed core-count and scheduling program\n";
  os << "\\ dims " << inst.dims.tc_rows << "x" << inst.dims.tc_cols
     << " vc " << inst.dims.vc_width << ", slot = " << inst.slot_cycles
     << " cycles, horizon = " << T << " slots\n";
  os << "\\ second objective (applied lexicographically): "
     << inst.tc_area / inst.area_budget_norm +
            inst.tc_power / inst.power_budget_norm
     << " x_tc + "
     << inst.vc_area / inst.area_budget_norm +
            inst.vc_power / inst.power_budget_norm
     << " x_vc\n";
  os << "Minimize\n obj:";
  // Synthetic zero-duration sink carries the makespan objective.
  for (Cycles t = 0; t <= T; ++t) {
    if (t > 0) os << " +";
    os << " " << t << " y_sink_" << t;
  }
  os << "\nSubject To\n";

  os << " start_sink:";
  for (Cycles t = 0; t <= T; ++t) os << " + y_sink_" << t;
  os << " = 1\n";
  for (std::size_t v = 0; v < inst.ops.size(); ++v) {
    os << " start_" << v << ":";
    for (Cycles t = 0; t + inst.ops[v].duration_slots <= T; ++t) {
      os << " + " << var(v, t);
    }
    os << " = 1\n";
  }

  std::size_t edge_idx = 0;
  for (const auto& [u, v] : inst.edges) {
    os << " prec_" << edge_idx++ << ":";
    for (Cycles t = 0;
         t + inst.ops[static_cast<std::size_t>(v)].duration_slots <= T; ++t) {
      if (t > 0) os << " + " << t << " " << var(static_cast<std::size_t>(v), t);
    }
    for (Cycles t = 0;
         t + inst.ops[static_cast<std::size_t>(u)].duration_slots <= T; ++t) {
      if (t > 0) os << " - " << t << " " << var(static_cast<std::size_t>(u), t);
    }
    os << " >= " << inst.ops[static_cast<std::size_t>(u)].duration_slots
       << "\n";
  }
  // Sink follows every op.
  for (std::size_t v = 0; v < inst.ops.size(); ++v) {
    os << " sink_after_" << v << ":";
    for (Cycles t = 1; t <= T; ++t) os << " + " << t << " y_sink_" << t;
    for (Cycles t = 1; t + inst.ops[v].duration_slots <= T; ++t) {
      os << " - " << t << " " << var(v, t);
    }
    os << " >= " << inst.ops[v].duration_slots << "\n";
  }

  for (int c = 0; c < 2; ++c) {
    const char* cname = c == 0 ? "tc" : "vc";
    for (Cycles t = 0; t < T; ++t) {
      bool any = false;
      std::ostringstream row;
      for (std::size_t v = 0; v < inst.ops.size(); ++v) {
        bool uses = c == 0 ? inst.ops[v].affinity != CoreAffinity::Vector
                           : inst.ops[v].affinity != CoreAffinity::Tensor;
        if (!uses) continue;
        Cycles dur = inst.ops[v].duration_slots;
        for (Cycles tp = std::max<Cycles>(0, t - dur + 1);
             tp <= t && tp + dur <= T; ++tp) {
          row << " + " << var(v, tp);
          any = true;
        }
      }
      if (!any) continue;
      os << " cap_" << cname << "_" << t << ":" << row.str() << " - x_"
         << cname << " <= 0\n";
    }
  }

  os << " area: " << inst.tc_area << " x_tc + " << inst.vc_area
     << " x_vc <= " << inst.area_budget << "\n";
  os << " power: " << inst.tc_power << " x_tc + " << inst.vc_power
     << " x_vc <= " << inst.power_budget << "\n";

  os << "Bounds\n";
  os << " 1 <= x_tc <= " << inst.max_tc << "\n";
  os << " 1 <= x_vc <= " << inst.max_vc << "\n";
  os << "General\n x_tc\n x_vc\n";
  os << "Binary\n";
  for (Cycles t = 0; t <= T; ++t) os << " y_sink_" << t << "\n";
  for (std::size_t v = 0; v < inst.ops.size(); ++v) {
    for (Cycles t = 0; t + inst.ops[v].duration_slots <= T; ++t) {
      os << " " << var(v, t) << "\n";
    }
  }
  os << "End\n";
}

std::string to_lp_string(const IlpInstance& inst) {
  std::ostringstream os;
  write_lp_format(inst, os);
  return os.str();
}

}  // namespace wham
