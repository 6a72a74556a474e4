#include "wham/global_search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <future>
#include <set>
#include <sstream>

#include <json.hpp>

namespace wham {

using nlohmann::json;

const char* to_string(PlanMode m) {
  switch (m) {
    case PlanMode::Common: return "common";
    case PlanMode::Individual: return "individual";
    case PlanMode::Mosaic: return "mosaic";
  }
  return "?";
}

namespace {

struct ModelContext {
  std::string name;
  StagePartition partition;
  std::vector<TopK> stage_topk;
};

double plan_end_to_end_metric(const MetricSpec& spec,
                              const PipelinePlan& plan) {
  if (spec.objective == Objective::Throughput) return plan.throughput;
  if (plan.throughput < spec.min_throughput) return kNegInf;
  return plan.perf_per_tdp;
}

}  // namespace

PipelinePlan evaluate_plan(const std::string& model, PlanMode mode,
                           const StagePartition& partition,
                           const std::vector<DesignPoint>& designs,
                           const PipelineParams& pp, const SystemConfig& cfg,
                           const MetricSpec& metric) {
  PipelinePlan plan;
  plan.model = model;
  plan.mode = mode;
  plan.designs = designs;

  const std::size_t s = partition.stage_graphs.size();
  plan.stage_time_s.resize(s, 0.0);
  for (std::size_t i = 0; i < s; ++i) {
    AnnotatedGraph ag =
        annotate(partition.stage_graphs[i], designs[i].dims, cfg);
    Schedule sched =
        list_schedule(ag, designs[i].num_tc, designs[i].num_vc);
    plan.stage_time_s[i] =
        static_cast<double>(sched.makespan) / cfg.clock_hz;
    plan.total_tdp_w += designs[i].tdp_watts;
  }
  for (Bytes b : partition.boundary_activation_bytes) {
    plan.comm_time_s.push_back(static_cast<double>(b) /
                               cfg.interconnect_bw_bytes_per_s);
  }
  plan.iteration_time_s =
      pipeline_iteration_time(plan.stage_time_s, plan.comm_time_s, pp);
  double dp = static_cast<double>(pp.data_parallel_replicas);
  plan.throughput = dp *
                    static_cast<double>(pp.num_microbatches) *
                    static_cast<double>(pp.microbatch_size) /
                    plan.iteration_time_s;
  plan.total_tdp_w *= dp;
  plan.perf_per_tdp = plan.throughput / plan.total_tdp_w;
  plan.metric = plan_end_to_end_metric(metric, plan);
  return plan;
}

GlobalResult global_search(const std::vector<Workload>& models,
                           const PipelineParams& pp, const SystemConfig& cfg,
                           const MetricSpec& metric, int k,
                           const GlobalOptions& opts) {
  pp.validate();
  metric.validate();
  if (models.empty()) throw ParseError("global search needs a model");

  GlobalResult result;
  std::vector<ModelContext> ctx(models.size());

  // Stage-local searches; stages run concurrently, results join in order.
  for (std::size_t mi = 0; mi < models.size(); ++mi) {
    ctx[mi].name = models[mi].name;
    TrainingGraph split = apply_tmp(models[mi].graph, pp.tmp_width, cfg);
    ctx[mi].partition = partition_model(split, pp, cfg);
    for (TrainingGraph& stage : ctx[mi].partition.stage_graphs) {
      stage = apply_fusion(stage);
    }

    const std::size_t s = ctx[mi].partition.stage_graphs.size();
    std::size_t threads = opts.threads > 0
                              ? static_cast<std::size_t>(opts.threads)
                              : s;
    threads = std::max<std::size_t>(1, std::min(threads, s));

    struct StageOut {
      TopK topk;
      SearchStats stats;
      std::vector<std::string> trace;
    };
    std::vector<StageOut> outs(s);
    std::vector<std::future<void>> futures;
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (std::size_t st = next.fetch_add(1); st < s;
           st = next.fetch_add(1)) {
        LocalSearchOptions lopts;
        lopts.engine = opts.engine;
        lopts.prune = opts.prune_local;
        lopts.ilp_limits = opts.ilp_limits;
        std::vector<std::string>& lines = outs[st].trace;
        lopts.trace = [&lines](const std::string& line) {
          lines.push_back(line);
        };
        std::ostringstream stage_name;
        stage_name << ctx[mi].name << "#stage" << st;
        std::vector<Workload> one{{stage_name.str(),
                                   ctx[mi].partition.stage_graphs[st]}};
        outs[st].topk =
            local_search(one, cfg, metric, k, lopts, &outs[st].stats);
      }
    };
    for (std::size_t t = 0; t < threads; ++t) {
      futures.push_back(std::async(std::launch::async, worker));
    }
    for (auto& f : futures) f.get();

    for (std::size_t st = 0; st < s; ++st) {
      if (opts.trace) {
        for (const std::string& line : outs[st].trace) {
          json j = json::parse(line);
          j["model"] = ctx[mi].name;
          j["stage"] = st;
          opts.trace(j.dump());
        }
      }
      result.local_stats.evaluated_dims += outs[st].stats.evaluated_dims;
      result.local_stats.visited_designs += outs[st].stats.visited_designs;
      result.local_stats.pruned_subtrees += outs[st].stats.pruned_subtrees;
      result.local_stats.exhaustive_dims += outs[st].stats.exhaustive_dims;
      result.local_stats.ilp_timeouts += outs[st].stats.ilp_timeouts;
      ctx[mi].stage_topk.push_back(std::move(outs[st].topk));
    }
    result.per_stage_topk[ctx[mi].name] = ctx[mi].stage_topk;
  }

  // Mosaic: each stage takes its own top-1.
  for (ModelContext& mc : ctx) {
    std::vector<DesignPoint> designs;
    for (const TopK& tk : mc.stage_topk) {
      designs.push_back(tk.entries.front().design);
    }
    result.mosaic.emplace(
        mc.name, evaluate_plan(mc.name, PlanMode::Mosaic, mc.partition,
                               designs, pp, cfg, metric));
  }

  // Candidate pool: unique design tuples over the k x s x m results, walked
  // smallest area first.
  std::vector<DesignPoint> pool;
  {
    std::set<std::string> seen;
    for (const ModelContext& mc : ctx) {
      for (const TopK& tk : mc.stage_topk) {
        for (const TopKEntry& e : tk.entries) {
          if (seen.insert(e.design.tuple_string()).second) {
            pool.push_back(e.design);
          }
        }
      }
    }
    std::sort(pool.begin(), pool.end(),
              [](const DesignPoint& a, const DesignPoint& b) {
                if (a.area_mm2 != b.area_mm2) return a.area_mm2 < b.area_mm2;
                return a.tuple_string() < b.tuple_string();
              });
  }
  result.pool_size = static_cast<std::int64_t>(pool.size());

  // Group into area levels.
  std::vector<std::vector<std::size_t>> levels;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (levels.empty() ||
        std::abs(pool[levels.back().front()].area_mm2 - pool[i].area_mm2) >
            1e-9) {
      levels.push_back({});
    }
    levels.back().push_back(i);
  }

  struct Candidate {
    DesignPoint design;
    std::map<std::string, PipelinePlan> plans;  // per model
    double weighted = kNegInf;
  };
  std::vector<Candidate> evaluated;
  std::map<std::string, double> model_best;
  for (const ModelContext& mc : ctx) model_best[mc.name] = kNegInf;

  int stale_levels = 0;
  std::size_t level_idx = 0;
  for (; level_idx < levels.size(); ++level_idx) {
    bool improved = false;
    for (std::size_t pi : levels[level_idx]) {
      Candidate cand;
      cand.design = pool[pi];
      double weighted = 0.0;
      bool filtered = false;
      for (ModelContext& mc : ctx) {
        std::vector<DesignPoint> designs(mc.partition.stage_graphs.size(),
                                         cand.design);
        PipelinePlan plan =
            evaluate_plan(mc.name, PlanMode::Individual, mc.partition,
                          designs, pp, cfg, metric);
        if (plan.metric > model_best[mc.name]) {
          model_best[mc.name] = plan.metric;
          improved = true;
        }
        if (plan.metric == kNegInf) {
          filtered = true;
        } else {
          weighted +=
              metric.weight_for(mc.name, ctx.size()) * plan.metric;
        }
        cand.plans.emplace(mc.name, std::move(plan));
      }
      cand.weighted = filtered ? kNegInf : weighted;
      if (opts.trace) {
        opts.trace(json{{"event", "global-evaluate"},
                        {"design", cand.design.tuple_string()},
                        {"weighted_metric", cand.weighted}}
                       .dump());
      }
      evaluated.push_back(std::move(cand));
    }
    if (!opts.prune_global) continue;
    if (improved) {
      stale_levels = 0;
    } else if (++stale_levels > cfg.search.hysteresis_levels) {
      ++level_idx;
      break;
    }
  }
  result.evaluated_candidates = static_cast<std::int64_t>(evaluated.size());
  for (std::size_t li = level_idx; li < levels.size(); ++li) {
    result.pruned_candidates +=
        static_cast<std::int64_t>(levels[li].size());
  }
  if (result.pruned_candidates > 0 && opts.trace) {
    opts.trace(json{{"event", "global-prune"},
                    {"skipped_candidates", result.pruned_candidates}}
                   .dump());
  }

  // Individual: best candidate per model; Common: best weighted average.
  auto pick = [&](const std::function<double(const Candidate&)>& score) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < evaluated.size(); ++i) {
      double a = score(evaluated[i]);
      double b = score(evaluated[best]);
      if (a > b) {
        best = i;
      } else if (a == b) {
        const DesignPoint& da = evaluated[i].design;
        const DesignPoint& db = evaluated[best].design;
        if (da.area_mm2 < db.area_mm2 ||
            (da.area_mm2 == db.area_mm2 &&
             da.tuple_string() < db.tuple_string())) {
          best = i;
        }
      }
    }
    return best;
  };
  if (evaluated.empty()) {
    throw InfeasibleBudgetError("global candidate pool is empty");
  }
  for (const ModelContext& mc : ctx) {
    std::size_t bi = pick([&](const Candidate& c) {
      return c.plans.at(mc.name).metric;
    });
    result.individual.emplace(mc.name, evaluated[bi].plans.at(mc.name));
  }
  std::size_t ci = pick([](const Candidate& c) { return c.weighted; });
  result.common_design = evaluated[ci].design;
  for (const ModelContext& mc : ctx) {
    PipelinePlan plan = evaluated[ci].plans.at(mc.name);
    plan.mode = PlanMode::Common;
    result.common.emplace(mc.name, std::move(plan));
  }
  return result;
}

}  // namespace wham
