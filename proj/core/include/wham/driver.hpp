#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>

#include "wham/global_search.hpp"
#include "wham/graph_io.hpp"

namespace wham {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitInfeasible = 2;

struct RunManifest {
  std::vector<std::filesystem::path> graph_paths;
  std::filesystem::path system_path;  // empty keeps the built-in defaults
  MetricSpec metric;
  SearchEngine engine = SearchEngine::Heuristic;
  PipelineParams pipeline;
  int k = 10;
  std::filesystem::path out_dir = ".";
  int threads = 0;  // 0: one per stage; WHAM_THREADS env overrides
};

// Single-accelerator search: writes topk.json, trace.jsonl, summary.csv.
int cmd_local(const RunManifest& m);

// Pipeline/model-parallel search: writes global.json, global.csv,
// trace.jsonl, with per-mode plans and convergence statistics.
int cmd_global(const RunManifest& m);

// Independent schedule check (precedence, occupancy, makespan) against the
// graph the schedule claims to implement.
int cmd_validate(const std::filesystem::path& schedule_file,
                 const std::filesystem::path& graph_file,
                 const std::filesystem::path& system_file = {});

struct EstimateRequest {
  std::filesystem::path graph_path;
  std::filesystem::path system_path;
  CoreDims dims{256, 256, 256};
  std::filesystem::path out_dir = ".";
};
// Per-op latency/energy annotation at fixed dims: writes estimate.json.
int cmd_estimate(const EstimateRequest& req);

struct ScheduleRequest {
  std::filesystem::path graph_path;
  std::filesystem::path system_path;
  CoreDims dims{256, 256, 256};
  std::optional<Count> num_tc;  // both empty: engine picks the counts
  std::optional<Count> num_vc;
  SearchEngine engine = SearchEngine::Heuristic;
  Count tmp_width = 1;
  std::filesystem::path out_dir = ".";
  std::filesystem::path dump_lp;  // optional LP-text instance dump
};
// Emits schedule.json consumable by cmd_validate.
int cmd_schedule(const ScheduleRequest& req);

std::uint64_t fnv1a64(std::string_view data);

}  // namespace wham
