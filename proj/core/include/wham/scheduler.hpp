#pragma once

#include <map>
#include <string>
#include <vector>

#include "wham/critical_path.hpp"
#include "wham/metrics.hpp"

namespace wham {

// Core slot taken by one op; BOTH-affinity ops hold one index of each type.
struct CoreSlot {
  int tc_index = -1;
  int vc_index = -1;
};

struct Schedule {
  std::map<std::string, Cycles> start;
  std::map<std::string, CoreSlot> core_index;
  Cycles makespan = 0;
  Count num_tc = 0;
  Count num_vc = 0;
};

// Event-driven resource-constrained list scheduling. Ready ops are ranked by
// (slack ascending, asap ascending, id); critical ops therefore go first.
// Throws NoCoreForAffinityError when an op's core type has count zero.
Schedule list_schedule(const AnnotatedGraph& ag, Count num_tc, Count num_vc,
                       const CriticalInfo* precomputed = nullptr);

// Independent validity check: precedence, per-core occupancy, capacity and
// makespan consistency. Returns human-readable violations; empty means valid.
std::vector<std::string> validate_schedule(
    const OperatorGraph& g, const std::map<std::string, Cycles>& latency,
    const Schedule& s);

// One core-count candidate visited by a search, with its schedule and metric.
struct EvaluatedDesign {
  DesignPoint design;
  Schedule schedule;
  Cycles makespan = 0;
  double throughput = 0.0;
  double metric = kNegInf;
};

// Orders by metric descending; ties go to smaller area, then design tuple.
bool better_design(const EvaluatedDesign& a, const EvaluatedDesign& b);

// Conflict-driven search for <#TC, #VC> at fixed dims. Starts at (1,1) and
// repeatedly blames the core type whose zero-slack ops wait longest for a
// free core, incrementing it until no critical op waits, the makespan hits
// the theoretical best, the budget refuses the increment, or the ASAP
// parallelism bound is reached. Returns every visited design ranked by
// metric. Throws InfeasibleBudgetError when even (1,1) violates the budget.
std::vector<EvaluatedDesign> heuristic_core_search(const AnnotatedGraph& ag,
                                                   const SystemConfig& cfg,
                                                   const MetricSpec& metric);

}  // namespace wham
