#include "wham/driver.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "wham/version.hpp"

namespace wham {

using nlohmann::json;

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

namespace {

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setfill('0') << std::setw(16) << v;
  return os.str();
}

SystemConfig load_config(const std::filesystem::path& path) {
  if (path.empty()) return SystemConfig{};
  return load_system_config_file(path);
}

std::string config_hash(const SystemConfig& cfg) {
  return hex64(fnv1a64(system_config_to_json(cfg)));
}

int threads_from_env(int manifest_threads) {
  if (const char* env = std::getenv("WHAM_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  return manifest_threads;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

json design_json(const DesignPoint& d) {
  return json{{"tuple", d.tuple_string()},
              {"num_tc", d.num_tc},
              {"tc_rows", d.dims.tc_rows},
              {"tc_cols", d.dims.tc_cols},
              {"num_vc", d.num_vc},
              {"vc_width", d.dims.vc_width},
              {"tc_l1_bytes", d.tc_l1_bytes},
              {"tc_l2_bytes", d.tc_l2_bytes},
              {"vc_l2_bytes", d.vc_l2_bytes},
              {"area_mm2", d.area_mm2},
              {"tdp_watts", d.tdp_watts}};
}

json stats_json(const SearchStats& s) {
  return json{{"evaluated_dims", s.evaluated_dims},
              {"visited_designs", s.visited_designs},
              {"pruned_subtrees", s.pruned_subtrees},
              {"exhaustive_dims", s.exhaustive_dims},
              {"ilp_timeouts", s.ilp_timeouts}};
}

json plan_json(const PipelinePlan& p) {
  json designs = json::array();
  for (const DesignPoint& d : p.designs) designs.push_back(design_json(d));
  return json{{"model", p.model},
              {"mode", to_string(p.mode)},
              {"designs", designs},
              {"stage_time_s", p.stage_time_s},
              {"comm_time_s", p.comm_time_s},
              {"iteration_time_s", p.iteration_time_s},
              {"throughput_samples_per_s", p.throughput},
              {"total_tdp_w", p.total_tdp_w},
              {"perf_per_tdp", p.perf_per_tdp},
              {"metric", p.metric}};
}

// Exception-to-exit-code boundary shared by every subcommand.
int guard(const std::function<int()>& body) {
  try {
    return body();
  } catch (const InfeasibleBudgetError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const UnpartitionableModelError& e) {
    std::cerr << "infeasible: UnpartitionableModel: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  }
}

std::vector<Workload> load_workloads(const RunManifest& m,
                                     const SystemConfig& cfg) {
  if (m.graph_paths.empty()) {
    throw ParseError("at least one --graph file is required");
  }
  std::vector<Workload> out;
  SynthesisOptions synth{cfg.element_bytes};
  for (const auto& path : m.graph_paths) {
    OperatorGraph fwd = load_forward_graph_file(path);
    out.push_back({fwd.name(), build_training_graph(fwd, synth)});
  }
  return out;
}

json topk_json(const TopK& topk) {
  json entries = json::array();
  int rank = 1;
  for (const TopKEntry& e : topk.entries) {
    json entry = design_json(e.design);
    entry["rank"] = rank++;
    entry["metric"] = e.metric;
    entry["makespan_cycles"] = e.makespan_cycles;
    entry["throughput_samples_per_s"] = e.throughput;
    entries.push_back(std::move(entry));
  }
  return json{{"k", topk.k}, {"entries", entries}};
}

std::string csv_number(double v) {
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

}  // namespace

int cmd_local(const RunManifest& m) {
  return guard([&]() {
    SystemConfig cfg = load_config(m.system_path);
    m.metric.validate();
    std::vector<Workload> workloads = load_workloads(m, cfg);
    for (Workload& w : workloads) {
      w.graph = apply_fusion(w.graph);
      Bytes footprint =
          training_memory_footprint(w.graph, m.pipeline, cfg, 0);
      if (footprint > cfg.hbm_bytes) {
        std::ostringstream os;
        os << "workload '" << w.name << "' needs " << footprint
           << " bytes of HBM but the device has " << cfg.hbm_bytes;
        throw UnpartitionableModelError(os.str());
      }
    }

    std::filesystem::create_directories(m.out_dir);
    std::vector<std::string> trace_lines;
    LocalSearchOptions opts;
    opts.engine = m.engine;
    opts.trace = [&trace_lines](const std::string& line) {
      trace_lines.push_back(line);
    };
    SearchStats stats;
    TopK topk = local_search(workloads, cfg, m.metric, m.k, opts, &stats);

    json report;
    report["version"] = kVersion;
    report["config_hash"] = config_hash(cfg);
    report["engine"] = to_string(m.engine);
    report["metric"] = to_string(m.metric.objective);
    if (m.metric.objective == Objective::PerfPerTdp) {
      report["min_throughput"] = m.metric.min_throughput;
    }
    json names = json::array();
    for (const Workload& w : workloads) names.push_back(w.name);
    report["workloads"] = names;
    report["topk"] = topk_json(topk);
    report["stats"] = stats_json(stats);
    write_file(m.out_dir / "topk.json", report.dump(2) + "\n");

    std::ostringstream trace;
    for (const std::string& line : trace_lines) trace << line << "\n";
    write_file(m.out_dir / "trace.jsonl", trace.str());

    std::ostringstream csv;
    csv << "rank,workload,design,num_tc,tc_rows,tc_cols,num_vc,vc_width,"
           "area_mm2,tdp_watts,metric,makespan_cycles,throughput\n";
    int rank = 1;
    for (const TopKEntry& e : topk.entries) {
      for (const auto& [workload, makespan] : e.makespan_cycles) {
        csv << rank << "," << workload << ",\"" << e.design.tuple_string()
            << "\"," << e.design.num_tc << "," << e.design.dims.tc_rows << ","
            << e.design.dims.tc_cols << "," << e.design.num_vc << ","
            << e.design.dims.vc_width << "," << csv_number(e.design.area_mm2)
            << "," << csv_number(e.design.tdp_watts) << ","
            << csv_number(e.metric) << "," << makespan << ","
            << csv_number(e.throughput.at(workload)) << "\n";
      }
      ++rank;
    }
    write_file(m.out_dir / "summary.csv", csv.str());
    return kExitOk;
  });
}

int cmd_global(const RunManifest& m) {
  return guard([&]() {
    SystemConfig cfg = load_config(m.system_path);
    m.metric.validate();
    std::vector<Workload> models = load_workloads(m, cfg);

    std::filesystem::create_directories(m.out_dir);
    std::vector<std::string> trace_lines;
    GlobalOptions opts;
    opts.engine = m.engine;
    opts.threads = threads_from_env(m.threads);
    opts.trace = [&trace_lines](const std::string& line) {
      trace_lines.push_back(line);
    };
    GlobalResult result =
        global_search(models, m.pipeline, cfg, m.metric, m.k, opts);

    json report;
    report["version"] = kVersion;
    report["config_hash"] = config_hash(cfg);
    report["engine"] = to_string(m.engine);
    report["metric"] = to_string(m.metric.objective);
    if (m.metric.objective == Objective::PerfPerTdp) {
      report["min_throughput"] = m.metric.min_throughput;
    }
    report["pipeline"] = json{{"depth", m.pipeline.depth},
                              {"scheme", to_string(m.pipeline.scheme)},
                              {"microbatches", m.pipeline.num_microbatches},
                              {"tmp_width", m.pipeline.tmp_width}};
    report["k"] = m.k;
    json modes;
    auto mode_block = [](const std::map<std::string, PipelinePlan>& plans) {
      json block;
      for (const auto& [model, plan] : plans) block[model] = plan_json(plan);
      return block;
    };
    modes["mosaic"] = mode_block(result.mosaic);
    modes["individual"] = mode_block(result.individual);
    modes["common"] = mode_block(result.common);
    report["modes"] = std::move(modes);
    report["common_design"] = design_json(result.common_design);
    json stage_topk;
    for (const auto& [model, topks] : result.per_stage_topk) {
      json stages = json::array();
      for (const TopK& tk : topks) stages.push_back(topk_json(tk));
      stage_topk[model] = std::move(stages);
    }
    report["per_stage_topk"] = std::move(stage_topk);
    report["stats"] = stats_json(result.local_stats);
    report["stats"]["global_pool_size"] = result.pool_size;
    report["stats"]["global_evaluated"] = result.evaluated_candidates;
    report["stats"]["global_pruned"] = result.pruned_candidates;
    report["stats"]["ilp_fallbacks"] = result.local_stats.ilp_timeouts;
    write_file(m.out_dir / "global.json", report.dump(2) + "\n");

    std::ostringstream trace;
    for (const std::string& line : trace_lines) trace << line << "\n";
    write_file(m.out_dir / "trace.jsonl", trace.str());

    std::ostringstream csv;
    csv << "model,mode,designs,iteration_time_s,throughput,total_tdp_w,"
           "perf_per_tdp\n";
    auto emit_rows = [&csv](const std::map<std::string, PipelinePlan>& plans) {
      for (const auto& [model, plan] : plans) {
        csv << model << "," << to_string(plan.mode) << ",\"";
        for (std::size_t i = 0; i < plan.designs.size(); ++i) {
          if (i) csv << "|";
          csv << plan.designs[i].tuple_string();
        }
        csv << "\"," << csv_number(plan.iteration_time_s) << ","
            << csv_number(plan.throughput) << ","
            << csv_number(plan.total_tdp_w) << ","
            << csv_number(plan.perf_per_tdp) << "\n";
      }
    };
    emit_rows(result.common);
    emit_rows(result.individual);
    emit_rows(result.mosaic);
    write_file(m.out_dir / "global.csv", csv.str());
    return kExitOk;
  });
}

namespace {

// Rebuilds the training graph a schedule file refers to, honoring the
// tmp/fusion toggles recorded in it.
TrainingGraph rebuild_for_schedule(const json& sched,
                                   const std::filesystem::path& graph_file,
                                   const SystemConfig& cfg) {
  OperatorGraph fwd = load_forward_graph_file(graph_file);
  TrainingGraph tg = build_training_graph(fwd, SynthesisOptions{
                                                   cfg.element_bytes});
  Count tmp = sched.value("tmp_width", 1);
  if (tmp > 1) tg = apply_tmp(tg, tmp, cfg);
  if (sched.value("fused", false)) tg = apply_fusion(tg);
  return tg;
}

}  // namespace

int cmd_schedule(const ScheduleRequest& req) {
  return guard([&]() {
    SystemConfig cfg = load_config(req.system_path);
    OperatorGraph fwd = load_forward_graph_file(req.graph_path);
    TrainingGraph tg =
        build_training_graph(fwd, SynthesisOptions{cfg.element_bytes});
    if (req.tmp_width > 1) tg = apply_tmp(tg, req.tmp_width, cfg);
    tg = apply_fusion(tg);
    AnnotatedGraph ag = annotate(tg, req.dims, cfg);

    Count num_tc = 0;
    Count num_vc = 0;
    Schedule sched;
    std::string engine_used = to_string(req.engine);
    if (req.num_tc && req.num_vc) {
      num_tc = *req.num_tc;
      num_vc = *req.num_vc;
      sched = list_schedule(ag, num_tc, num_vc);
    } else if (req.engine == SearchEngine::Ilp) {
      Cycles serial = build_instance(ag, cfg, 20'000).serial_slots;
      IlpInstance inst = build_instance(ag, cfg, serial);
      if (!req.dump_lp.empty()) {
        std::ofstream lp(req.dump_lp);
        if (!lp) throw Error("cannot write " + req.dump_lp.string());
        write_lp_format(inst, lp);
      }
      IlpSolution sol = solve(inst);
      if (sol.status == SolveStatus::Optimal) {
        num_tc = sol.num_tc;
        num_vc = sol.num_vc;
        std::map<std::string, Cycles> starts;
        for (const auto& [id, slot] : sol.start_slots) {
          starts[id] = slot * sol.slot_cycles;
        }
        sched = schedule_from_starts(ag, starts, num_tc, num_vc);
      } else {
        engine_used = "heuristic (ilp " +
                      std::string(to_string(sol.status)) + ")";
        MetricSpec throughput_metric;
        auto designs = heuristic_core_search(ag, cfg, throughput_metric);
        const EvaluatedDesign& best = designs.front();
        num_tc = best.design.num_tc;
        num_vc = best.design.num_vc;
        sched = best.schedule;
      }
    } else {
      MetricSpec throughput_metric;
      auto designs = heuristic_core_search(ag, cfg, throughput_metric);
      const EvaluatedDesign& best = designs.front();
      num_tc = best.design.num_tc;
      num_vc = best.design.num_vc;
      sched = best.schedule;
    }

    if (req.engine != SearchEngine::Ilp && !req.dump_lp.empty()) {
      Cycles serial = build_instance(ag, cfg, 20'000).serial_slots;
      IlpInstance inst = build_instance(ag, cfg, serial);
      std::ofstream lp(req.dump_lp);
      if (!lp) throw Error("cannot write " + req.dump_lp.string());
      write_lp_format(inst, lp);
    }

    json doc;
    doc["version"] = kVersion;
    doc["config_hash"] = config_hash(cfg);
    doc["graph"] = tg.graph.name();
    doc["batch_size"] = tg.graph.batch_size();
    doc["fused"] = true;
    doc["tmp_width"] = req.tmp_width;
    doc["engine"] = engine_used;
    doc["dims"] = json{{"tc_rows", req.dims.tc_rows},
                       {"tc_cols", req.dims.tc_cols},
                       {"vc_width", req.dims.vc_width}};
    doc["num_tc"] = num_tc;
    doc["num_vc"] = num_vc;
    doc["makespan_cycles"] = sched.makespan;
    json ops = json::array();
    for (const auto& [id, start] : sched.start) {
      const CoreSlot& slot = sched.core_index.at(id);
      ops.push_back(json{{"id", id},
                         {"start", start},
                         {"latency_cycles", ag.costs.at(id).latency_cycles},
                         {"tc_index", slot.tc_index},
                         {"vc_index", slot.vc_index}});
    }
    doc["ops"] = std::move(ops);
    std::filesystem::create_directories(req.out_dir);
    write_file(req.out_dir / "schedule.json", doc.dump(2) + "\n");
    return kExitOk;
  });
}

int cmd_validate(const std::filesystem::path& schedule_file,
                 const std::filesystem::path& graph_file,
                 const std::filesystem::path& system_file) {
  return guard([&]() {
    std::ifstream in(schedule_file);
    if (!in) throw ParseError("cannot open schedule: " +
                              schedule_file.string());
    json sched_doc;
    try {
      sched_doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("schedule is not valid JSON: ") + e.what());
    }
    SystemConfig cfg = load_config(system_file);
    TrainingGraph tg = rebuild_for_schedule(sched_doc, graph_file, cfg);

    Schedule sched;
    sched.num_tc = sched_doc.at("num_tc").get<Count>();
    sched.num_vc = sched_doc.at("num_vc").get<Count>();
    sched.makespan = sched_doc.at("makespan_cycles").get<Cycles>();
    std::map<std::string, Cycles> latency;
    for (const json& jop : sched_doc.at("ops")) {
      std::string id = jop.at("id").get<std::string>();
      sched.start[id] = jop.at("start").get<Cycles>();
      latency[id] = jop.at("latency_cycles").get<Cycles>();
      sched.core_index[id] = CoreSlot{jop.value("tc_index", -1),
                                      jop.value("vc_index", -1)};
    }

    // The schedule must cover exactly the graph's ops.
    std::vector<std::string> violations;
    for (const Operator& op : tg.graph.operators()) {
      if (!sched.start.count(op.id)) {
        violations.push_back("graph op '" + op.id + "' missing from schedule");
      }
    }
    for (const auto& [id, start] : sched.start) {
      if (!tg.graph.has_op(id)) {
        violations.push_back("schedule op '" + id + "' not in graph");
      }
    }
    if (violations.empty()) {
      auto more = validate_schedule(tg.graph, latency, sched);
      violations.insert(violations.end(), more.begin(), more.end());
    }
    if (!violations.empty()) {
      for (const std::string& v : violations) std::cerr << v << "\n";
      std::cerr << violations.size() << " violation(s)\n";
      return kExitInputError;
    }
    std::cout << "schedule valid: " << sched.start.size() << " ops, makespan "
              << sched.makespan << " cycles\n";
    return kExitOk;
  });
}

int cmd_estimate(const EstimateRequest& req) {
  return guard([&]() {
    SystemConfig cfg = load_config(req.system_path);
    OperatorGraph fwd = load_forward_graph_file(req.graph_path);
    TrainingGraph tg =
        build_training_graph(fwd, SynthesisOptions{cfg.element_bytes});
    tg = apply_fusion(tg);
    AnnotatedGraph ag = annotate(tg, req.dims, cfg);

    json doc;
    doc["version"] = kVersion;
    doc["config_hash"] = config_hash(cfg);
    doc["graph"] = tg.graph.name();
    doc["dims"] = json{{"tc_rows", req.dims.tc_rows},
                       {"tc_cols", req.dims.tc_cols},
                       {"vc_width", req.dims.vc_width}};
    json ops;
    for (const auto& [id, cost] : ag.costs) {
      ops[id] = json{{"latency_cycles", cost.latency_cycles},
                     {"compute_cycles", cost.compute_cycles},
                     {"memory_cycles", cost.memory_cycles},
                     {"moved_bytes", cost.moved_bytes},
                     {"energy_j", cost.energy_j},
                     {"core", to_string(cost.core)}};
    }
    doc["ops"] = std::move(ops);
    doc["serial_cycles"] = ag.serial_cycles();
    doc["total_energy_j"] = ag.total_energy_j();
    doc["stash_bytes"] = tg.stash_bytes;
    PipelineParams pp;
    doc["footprint_bytes"] = training_memory_footprint(tg, pp, cfg, 0);
    std::filesystem::create_directories(req.out_dir);
    write_file(req.out_dir / "estimate.json", doc.dump(2) + "\n");
    return kExitOk;
  });
}

}  // namespace wham
