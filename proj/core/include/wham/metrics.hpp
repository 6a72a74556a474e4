#pragma once

#include <limits>
#include <map>
#include <string>

#include "wham/arch.hpp"
#include "wham/cost_model.hpp"

namespace wham {

enum class Objective { Throughput, PerfPerTdp };

const char* to_string(Objective o);

// Optimization target. PerfPerTdp maximizes throughput per watt subject to a
// user-specified minimum end-to-end throughput; candidates below the floor
// rank at -inf. Weights cover multi-workload (common) searches and must sum
// to 1 when present; equal weights by default.
struct MetricSpec {
  Objective objective = Objective::Throughput;
  double min_throughput = 0.0;
  std::map<std::string, double> weights;

  void validate() const;
  double weight_for(const std::string& workload, std::size_t n_workloads) const;
};

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double throughput_samples_per_s(Cycles makespan_cycles, Count samples,
                                const SystemConfig& cfg);

// Metric of one design on one workload given its schedule makespan.
double metric_value(const MetricSpec& spec, Cycles makespan_cycles,
                    Count samples, const DesignPoint& design,
                    const SystemConfig& cfg);

}  // namespace wham
