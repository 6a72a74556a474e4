#include "wham/dim_search.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>

#include <json.hpp>

namespace wham {

using nlohmann::json;

const char* to_string(SearchEngine e) {
  return e == SearchEngine::Heuristic ? "heuristic" : "ilp";
}

PruneOutcome prune_step(double parent_metric,
                        const std::vector<double>& child_metrics) {
  PruneOutcome out;
  std::vector<std::size_t> better;
  for (std::size_t i = 0; i < child_metrics.size(); ++i) {
    if (child_metrics[i] > parent_metric) better.push_back(i);
  }
  if (better.empty()) {
    out.hysteresis = !child_metrics.empty();
    return out;
  }
  out.descend = std::move(better);
  return out;
}

namespace {

json dims_json(const CoreDims& d) {
  return json{{"tc_rows", d.tc_rows}, {"tc_cols", d.tc_cols},
              {"vc_width", d.vc_width}};
}

void emit(const TraceSink& sink, const json& j) {
  if (sink) sink(j.dump());
}

bool better_entry(const TopKEntry& a, const TopKEntry& b) {
  if (a.metric != b.metric) return a.metric > b.metric;
  if (a.design.area_mm2 != b.design.area_mm2) {
    return a.design.area_mm2 < b.design.area_mm2;
  }
  return a.design.tuple_string() < b.design.tuple_string();
}

}  // namespace

std::vector<TopKEntry> evaluate_dims(const CoreDims& dims,
                                     const std::vector<Workload>& workloads,
                                     const SystemConfig& cfg,
                                     const MetricSpec& metric,
                                     const LocalSearchOptions& opts,
                                     SearchStats* stats) {
  {
    DesignPoint single = make_design(1, dims, 1, cfg);
    if (!within_budget(single, cfg)) {
      throw InfeasibleBudgetError("design " + single.tuple_string() +
                                  " exceeds the area/power budget");
    }
  }
  if (stats) stats->evaluated_dims += 1;

  struct PerWorkload {
    AnnotatedGraph annotated;
    IlpInstance instance;  // engine == Ilp only
    bool ilp_usable = false;
  };
  std::vector<PerWorkload> per;
  per.reserve(workloads.size());
  std::set<std::pair<Count, Count>> candidates;

  for (const Workload& w : workloads) {
    PerWorkload pw;
    pw.annotated = annotate(w.graph, dims, cfg);
    if (opts.engine == SearchEngine::Ilp) {
      // The serial sum is always a feasible horizon (the slot cap keeps it
      // under 10,000 slots), so the first build just measures it.
      Cycles serial = build_instance(pw.annotated, cfg, 20'000).serial_slots;
      pw.instance = build_instance(pw.annotated, cfg, serial);
      IlpSolution sol = solve(pw.instance, opts.ilp_limits);
      if (sol.status == SolveStatus::Optimal) {
        pw.ilp_usable = true;
        candidates.emplace(sol.num_tc, sol.num_vc);
      } else {
        if (stats) stats->ilp_timeouts += 1;
        emit(opts.trace, json{{"event", "ilp-fallback"},
                              {"workload", w.name},
                              {"dims", dims_json(dims)}});
      }
    }
    if (opts.engine == SearchEngine::Heuristic || !pw.ilp_usable) {
      for (const EvaluatedDesign& ev :
           heuristic_core_search(pw.annotated, cfg, metric)) {
        candidates.emplace(ev.design.num_tc, ev.design.num_vc);
      }
    }
    per.push_back(std::move(pw));
  }

  std::vector<TopKEntry> entries;
  for (const auto& [tc, vc] : candidates) {
    TopKEntry entry;
    entry.design = make_design(tc, dims, vc, cfg);
    if (!within_budget(entry.design, cfg)) continue;
    double weighted = 0.0;
    bool filtered = false;
    for (std::size_t i = 0; i < workloads.size(); ++i) {
      const Workload& w = workloads[i];
      Cycles makespan = 0;
      if (opts.engine == SearchEngine::Ilp && per[i].ilp_usable) {
        IlpSolution fixed =
            solve_fixed_counts(per[i].instance, tc, vc, opts.ilp_limits);
        if (fixed.status == SolveStatus::Optimal) {
          makespan = fixed.makespan_cycles();
        }
      }
      if (makespan == 0) {
        makespan = list_schedule(per[i].annotated, tc, vc).makespan;
      }
      Count samples = w.graph.graph.batch_size();
      double m = metric_value(metric, makespan, samples, entry.design, cfg);
      entry.makespan_cycles[w.name] = makespan;
      entry.throughput[w.name] =
          throughput_samples_per_s(makespan, samples, cfg);
      if (m == kNegInf) {
        filtered = true;
        break;
      }
      weighted += metric.weight_for(w.name, workloads.size()) * m;
    }
    entry.metric = filtered ? kNegInf : weighted;
    if (stats) stats->visited_designs += 1;
    entries.push_back(std::move(entry));
  }
  std::sort(entries.begin(), entries.end(), better_entry);
  return entries;
}

namespace {

struct DimsLess {
  bool operator()(const CoreDims& a, const CoreDims& b) const {
    return std::tie(a.tc_rows, a.tc_cols, a.vc_width) <
           std::tie(b.tc_rows, b.tc_cols, b.vc_width);
  }
};

// Shared walk state for the two sweep phases.
class TreeWalker {
 public:
  TreeWalker(const std::vector<Workload>& workloads, const SystemConfig& cfg,
             const MetricSpec& metric, const LocalSearchOptions& opts,
             SearchStats* stats)
      : workloads_(workloads),
        cfg_(cfg),
        metric_(metric),
        opts_(opts),
        stats_(stats) {}

  double metric_of(const CoreDims& dims) {
    auto it = cache_.find(dims);
    if (it != cache_.end()) {
      return it->second.empty() ? kNegInf : it->second.front().metric;
    }
    std::vector<TopKEntry> entries;
    try {
      entries = evaluate_dims(dims, workloads_, cfg_, metric_, opts_, stats_);
    } catch (const InfeasibleBudgetError&) {
      // Over-budget dims stay in the walk with a -inf metric so the search
      // keeps descending toward feasible sizes.
    }
    json designs = json::array();
    for (const TopKEntry& e : entries) {
      designs.push_back(json{{"tuple", e.design.tuple_string()},
                             {"metric", e.metric}});
    }
    emit(opts_.trace,
         json{{"event", "evaluate"},
              {"dims", dims_json(dims)},
              {"metric", entries.empty() ? kNegInf : entries.front().metric},
              {"designs", designs}});
    auto slot = cache_.emplace(dims, std::move(entries)).first;
    return slot->second.empty() ? kNegInf : slot->second.front().metric;
  }

  // Breadth-first walk from root, using `children` to generate the next
  // level of one node.
  void walk(const CoreDims& root,
            const std::function<std::vector<CoreDims>(const CoreDims&)>&
                children) {
    std::deque<CoreDims> frontier;
    std::set<CoreDims, DimsLess> expanded;
    frontier.push_back(root);
    expanded.insert(root);
    metric_of(root);
    while (!frontier.empty()) {
      CoreDims parent = frontier.front();
      frontier.pop_front();
      double parent_metric = metric_of(parent);
      std::vector<CoreDims> kids = children(parent);
      if (kids.empty()) continue;
      std::vector<double> kid_metrics;
      for (const CoreDims& kid : kids) kid_metrics.push_back(metric_of(kid));

      auto schedule = [&](const CoreDims& kid) {
        if (expanded.insert(kid).second) frontier.push_back(kid);
      };
      if (!opts_.prune || parent_metric == kNegInf) {
        // Unpruned sweeps and over-budget parents descend everywhere.
        for (const CoreDims& kid : kids) schedule(kid);
        continue;
      }
      PruneOutcome outcome = prune_step(parent_metric, kid_metrics);
      if (!outcome.hysteresis) {
        for (std::size_t i : outcome.descend) schedule(kids[i]);
        if (outcome.descend.size() < kids.size()) {
          json pruned = json::array();
          for (std::size_t i = 0; i < kids.size(); ++i) {
            if (std::find(outcome.descend.begin(), outcome.descend.end(), i) ==
                outcome.descend.end()) {
              pruned.push_back(dims_json(kids[i]));
            }
          }
          if (stats_) stats_->pruned_subtrees += pruned.size();
          emit(opts_.trace, json{{"event", "prune"},
                                 {"rule", "worse-child"},
                                 {"parent", dims_json(parent)},
                                 {"pruned", pruned}});
        }
        continue;
      }

      // Hysteresis: probe up to hysteresis_levels below the children; resume
      // from the first improving node or prune the whole subtree.
      std::vector<CoreDims> band = kids;
      std::set<CoreDims, DimsLess> seen(band.begin(), band.end());
      bool resumed = false;
      for (int level = 0; level < cfg_.search.hysteresis_levels && !resumed;
           ++level) {
        std::vector<CoreDims> next;
        for (const CoreDims& node : band) {
          for (const CoreDims& kid : children(node)) {
            if (seen.insert(kid).second) next.push_back(kid);
          }
        }
        for (const CoreDims& node : next) {
          if (metric_of(node) > parent_metric) {
            schedule(node);
            emit(opts_.trace, json{{"event", "hysteresis-resume"},
                                   {"parent", dims_json(parent)},
                                   {"resume", dims_json(node)}});
            resumed = true;
            break;
          }
        }
        band = std::move(next);
      }
      if (!resumed) {
        if (stats_) stats_->pruned_subtrees += 1;
        emit(opts_.trace, json{{"event", "prune"},
                               {"rule", "hysteresis"},
                               {"parent", dims_json(parent)}});
      }
    }
  }

  const std::map<CoreDims, std::vector<TopKEntry>, DimsLess>& cache() const {
    return cache_;
  }

 private:
  const std::vector<Workload>& workloads_;
  const SystemConfig& cfg_;
  const MetricSpec& metric_;
  const LocalSearchOptions& opts_;
  SearchStats* stats_;
  std::map<CoreDims, std::vector<TopKEntry>, DimsLess> cache_;
};

Count halved(Count v, Count base) { return v / base; }

std::int64_t steps_down(Count from, Count min_dim, Count base) {
  std::int64_t n = 0;
  for (Count v = from; v >= min_dim; v = halved(v, base)) ++n;
  return n;
}

}  // namespace

TopK local_search(const std::vector<Workload>& workloads,
                  const SystemConfig& cfg, const MetricSpec& metric, int k,
                  const LocalSearchOptions& opts, SearchStats* stats) {
  metric.validate();
  if (workloads.empty()) throw ParseError("local search needs a workload");
  const SearchConfig& sc = cfg.search;

  TreeWalker walker(workloads, cfg, metric, opts, stats);
  CoreDims root{sc.root_tc_rows, sc.root_tc_cols, sc.root_vc_width};

  emit(opts.trace, json{{"event", "phase"}, {"name", "tc-sweep"}});
  walker.walk(root, [&sc](const CoreDims& d) {
    std::vector<CoreDims> kids;
    if (halved(d.tc_rows, sc.step_base) >= sc.min_dim) {
      kids.push_back({halved(d.tc_rows, sc.step_base), d.tc_cols, d.vc_width});
    }
    if (halved(d.tc_cols, sc.step_base) >= sc.min_dim) {
      kids.push_back({d.tc_rows, halved(d.tc_cols, sc.step_base), d.vc_width});
    }
    return kids;
  });

  // Pin the winning tensor dims, then sweep the vector width chain.
  CoreDims best_tc = root;
  double best_tc_metric = kNegInf;
  for (const auto& [dims, entries] : walker.cache()) {
    if (entries.empty()) continue;
    double m = entries.front().metric;
    if (m > best_tc_metric ||
        (m == best_tc_metric &&
         dims.tc_rows * dims.tc_cols < best_tc.tc_rows * best_tc.tc_cols)) {
      best_tc_metric = m;
      best_tc = dims;
    }
  }

  emit(opts.trace, json{{"event", "phase"}, {"name", "vc-sweep"}});
  CoreDims vc_root{best_tc.tc_rows, best_tc.tc_cols, sc.root_vc_width};
  walker.walk(vc_root, [&sc](const CoreDims& d) {
    std::vector<CoreDims> kids;
    if (halved(d.vc_width, sc.step_base) >= sc.min_dim) {
      kids.push_back({d.tc_rows, d.tc_cols, halved(d.vc_width, sc.step_base)});
    }
    return kids;
  });

  if (stats) {
    stats->exhaustive_dims =
        steps_down(sc.root_tc_rows, sc.min_dim, sc.step_base) *
            steps_down(sc.root_tc_cols, sc.min_dim, sc.step_base) +
        steps_down(sc.root_vc_width, sc.min_dim, sc.step_base) - 1;
  }

  TopK out;
  out.k = k;
  std::vector<TopKEntry> all;
  for (const auto& [dims, entries] : walker.cache()) {
    all.insert(all.end(), entries.begin(), entries.end());
  }
  std::sort(all.begin(), all.end(), better_entry);
  std::set<std::string> seen;
  for (TopKEntry& e : all) {
    if (e.metric == kNegInf) continue;
    if (!seen.insert(e.design.tuple_string()).second) continue;
    out.entries.push_back(std::move(e));
    if (static_cast<int>(out.entries.size()) == k) break;
  }
  if (out.entries.empty()) {
    throw InfeasibleBudgetError(
        "no design within budget satisfies the metric constraints");
  }
  return out;
}

}  // namespace wham
