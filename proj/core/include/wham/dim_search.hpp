#pragma once

#include <functional>

#include "wham/ilp.hpp"
#include "wham/scheduler.hpp"

namespace wham {

enum class SearchEngine { Heuristic, Ilp };
const char* to_string(SearchEngine e);

struct Workload {
  std::string name;
  TrainingGraph graph;
};

// Receives one JSON line per search event (evaluations, prunes, fallbacks).
using TraceSink = std::function<void(const std::string& line)>;

struct SearchStats {
  std::int64_t evaluated_dims = 0;   // dimension nodes costed
  std::int64_t visited_designs = 0;  // (dims, counts) candidates examined
  std::int64_t pruned_subtrees = 0;
  std::int64_t exhaustive_dims = 0;  // unpruned sweep size, for comparison
  std::int64_t ilp_timeouts = 0;     // evaluations that fell back to heuristic
};

struct TopKEntry {
  DesignPoint design;
  double metric = kNegInf;  // weighted across workloads
  std::map<std::string, Cycles> makespan_cycles;
  std::map<std::string, double> throughput;
};

struct TopK {
  int k = 1;
  std::vector<TopKEntry> entries;  // metric descending, unique design tuples
};

// Pruning rule over one parent and its evaluated children:
//   exactly one child better  -> descend into it, prune the other subtree
//   all children better       -> descend into all
//   no child better           -> hysteresis probe before pruning the subtree
struct PruneOutcome {
  std::vector<std::size_t> descend;
  bool hysteresis = false;
};
PruneOutcome prune_step(double parent_metric,
                        const std::vector<double>& child_metrics);

struct LocalSearchOptions {
  SearchEngine engine = SearchEngine::Heuristic;
  bool prune = true;
  TraceSink trace;
  SolveLimits ilp_limits{};
};

// All core-count candidates at one core dimensionality, best first. The
// heuristic contributes every design it visits; the ILP contributes its
// optimum (falling back to the heuristic on timeout). Throws
// InfeasibleBudgetError when the single-core design at dims already busts
// the budget.
std::vector<TopKEntry> evaluate_dims(const CoreDims& dims,
                                     const std::vector<Workload>& workloads,
                                     const SystemConfig& cfg,
                                     const MetricSpec& metric,
                                     const LocalSearchOptions& opts,
                                     SearchStats* stats = nullptr);

// Breadth-first dimension-tree walk: tensor dims first (vector width pinned
// at the root), then the vector-width chain at the winning tensor dims.
// Prunes per prune_step with the configured hysteresis band; aggregates all
// visited designs into a TopK. Throws InfeasibleBudgetError only if no
// feasible design exists.
TopK local_search(const std::vector<Workload>& workloads,
                  const SystemConfig& cfg, const MetricSpec& metric, int k,
                  const LocalSearchOptions& opts = {},
                  SearchStats* stats = nullptr);

}  // namespace wham
