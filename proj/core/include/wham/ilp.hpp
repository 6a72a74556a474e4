#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "wham/critical_path.hpp"
#include "wham/scheduler.hpp"

namespace wham {

// Time-indexed instance over slotted time. Slot granularity is the gcd of
// all op latencies, raised if needed so the serial sum fits in 10,000 slots;
// latencies round up to whole slots.
struct IlpOp {
  std::string id;
  Cycles duration_slots = 1;
  CoreAffinity affinity = CoreAffinity::Tensor;
};

struct IlpInstance {
  std::vector<IlpOp> ops;                  // deterministic topological order
  std::vector<std::pair<int, int>> edges;  // index pairs (src, dst)
  Cycles horizon_slots = 0;                // T
  Cycles slot_cycles = 1;                  // g cycles per slot
  Count max_tc = 1;                        // ASAP parallelism bounds on x(c)
  Count max_vc = 1;
  CoreDims dims;
  double tc_area = 0.0;  // per-unit area/power at dims
  double vc_area = 0.0;
  double tc_power = 0.0;
  double vc_power = 0.0;
  double area_budget = 0.0;  // budgets net of the fixed terms
  double power_budget = 0.0;
  double area_budget_norm = 1.0;  // normalizers of the core-cost objective
  double power_budget_norm = 1.0;
  Cycles critical_path_slots = 0;
  Cycles serial_slots = 0;

  // One y_(v,t) per op and feasible start slot t in [0, T - duration].
  std::int64_t variable_count() const;
  bool counts_within_budget(Count num_tc, Count num_vc) const;
  // Area+power of the core counts, each normalized by its budget.
  double core_cost(Count num_tc, Count num_vc) const;
};

enum class SolveStatus { Optimal, Infeasible, Timeout };
const char* to_string(SolveStatus s);

struct SolveLimits {
  std::int64_t node_budget = 20'000'000;
};

// Lexicographic optimum: first the makespan (start slot of the synthetic
// sink), then the normalized area+power cost of the core counts; remaining
// ties prefer fewer tensor cores, then fewer vector cores.
struct IlpSolution {
  SolveStatus status = SolveStatus::Infeasible;
  Count num_tc = 0;
  Count num_vc = 0;
  std::map<std::string, Cycles> start_slots;
  Cycles makespan_slots = 0;
  Cycles slot_cycles = 1;
  double core_cost = 0.0;
  std::int64_t nodes_explored = 0;

  Cycles makespan_cycles() const { return makespan_slots * slot_cycles; }
};

Cycles slot_granularity(const AnnotatedGraph& ag);

// Throws HorizonTooSmallError if the horizon cannot hold the critical path.
IlpInstance build_instance(const AnnotatedGraph& ag, const SystemConfig& cfg,
                           Cycles horizon_slots);

// Exact branch-and-bound: enumerates core counts up to the parallelism
// bound, and for each solves min-makespan by DFS over event-time start
// decisions with precomputed critical-path tail bounds. TIMEOUT carries the
// best incumbent found.
IlpSolution solve(const IlpInstance& inst, const SolveLimits& limits = {});

// Min-makespan with the core counts pinned.
IlpSolution solve_fixed_counts(const IlpInstance& inst, Count num_tc,
                               Count num_vc, const SolveLimits& limits = {});

// Smallest horizon (in slots) admitting a feasible schedule under
// budget-feasible core counts, by binary search between the critical path
// and the serial sum.
Cycles min_horizon(const AnnotatedGraph& ag, const SystemConfig& cfg,
                   const SolveLimits& limits = {});

// Schedule reconstruction: greedy interval core assignment over start times
// that already respect per-type capacity.
Schedule schedule_from_starts(const AnnotatedGraph& ag,
                              const std::map<std::string, Cycles>& start,
                              Count num_tc, Count num_vc);

// CPLEX LP-format dump of the time-indexed program for external solvers.
void write_lp_format(const IlpInstance& inst, std::ostream& os);
std::string to_lp_string(const IlpInstance& inst);

}  // namespace wham
