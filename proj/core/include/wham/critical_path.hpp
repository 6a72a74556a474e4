#pragma once

#include <map>
#include <set>
#include <string>

#include "wham/cost_model.hpp"

namespace wham {

// ASAP/ALAP analysis under infinite cores. Ops with zero slack are the
// critical ones; best_latency is the makespan of the ASAP schedule and a
// lower bound for any resource-constrained schedule.
struct CriticalInfo {
  std::map<std::string, Cycles> asap;
  std::map<std::string, Cycles> alap;
  std::map<std::string, Cycles> slack;
  Cycles best_latency = 0;
  std::set<std::string> critical_ops;
};

CriticalInfo compute_asap_alap(const AnnotatedGraph& ag);

// Maximum number of simultaneously active ops per core type in the ASAP
// schedule: the parallelizability limit that caps useful core counts.
// BOTH-affinity ops count toward both types.
struct ParallelismBound {
  Count tensor = 0;
  Count vector = 0;
};

ParallelismBound asap_parallelism_bound(const AnnotatedGraph& ag,
                                        const CriticalInfo& info);

}  // namespace wham
