#include "wham/metrics.hpp"

#include <cmath>

namespace wham {

const char* to_string(Objective o) {
  return o == Objective::Throughput ? "throughput" : "perf-tdp";
}

void MetricSpec::validate() const {
  if (objective == Objective::PerfPerTdp && !(min_throughput > 0.0)) {
    throw ParseError(
        "perf-tdp objective requires a positive --min-throughput");
  }
  if (!weights.empty()) {
    double sum = 0.0;
    for (const auto& [name, w] : weights) {
      if (w < 0.0) throw ParseError("workload weight for '" + name +
                                    "' is negative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ParseError("workload weights must sum to 1");
    }
  }
}

double MetricSpec::weight_for(const std::string& workload,
                              std::size_t n_workloads) const {
  auto it = weights.find(workload);
  if (it != weights.end()) return it->second;
  return n_workloads == 0 ? 1.0 : 1.0 / static_cast<double>(n_workloads);
}

double throughput_samples_per_s(Cycles makespan_cycles, Count samples,
                                const SystemConfig& cfg) {
  if (makespan_cycles <= 0) return 0.0;
  return static_cast<double>(samples) * cfg.clock_hz /
         static_cast<double>(makespan_cycles);
}

double metric_value(const MetricSpec& spec, Cycles makespan_cycles,
                    Count samples, const DesignPoint& design,
                    const SystemConfig& cfg) {
  double tput = throughput_samples_per_s(makespan_cycles, samples, cfg);
  if (spec.objective == Objective::Throughput) return tput;
  if (tput < spec.min_throughput) return kNegInf;
  return tput / design.tdp_watts;
}

}  // namespace wham
