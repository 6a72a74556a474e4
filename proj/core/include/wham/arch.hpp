#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>

#include "wham/errors.hpp"
#include "wham/graph.hpp"

namespace wham {

// Tensor core systolic dims and vector core lane width.
struct CoreDims {
  Count tc_rows = 1;
  Count tc_cols = 1;
  Count vc_width = 1;

  friend auto operator<=>(const CoreDims&, const CoreDims&) = default;
};

// Area/power/energy coefficients of the analytical cost model. SRAM terms
// are per MiB (2^20 bytes); energies are joules per MAC / element / byte.
struct CostModelCoefficients {
  double a_pe = 0.0006;   // mm^2 per tensor-core PE
  double a_lane = 0.002;  // mm^2 per vector lane
  double a_sram = 0.4;    // mm^2 per MiB of on-chip SRAM
  double a_fixed = 10.0;  // mm^2 for NoC, dispatch, HBM phy
  double p_pe = 0.0012;   // W per PE
  double p_lane = 0.004;  // W per lane
  double p_sram = 0.3;    // W per MiB
  double p_fixed = 20.0;  // W

  double e_mac = 1e-12;   // J per MAC
  double e_vec = 2e-12;   // J per vector element
  double e_hbm = 7e-12;   // J per HBM byte
  double e_sram = 1e-12;  // J per SRAM byte

  Count tile_depth_factor = 64;  // double-buffered tile depth for TC L2
  Count vc_l2_factor = 1024;     // stall-free streaming depth for VC L2
  double optimizer_state_multiplier = 2.0;  // momentum + variance
};

// Knobs of the dimension search; bounds live here rather than in the
// architecture template.
struct SearchConfig {
  Count root_tc_rows = 256;
  Count root_tc_cols = 256;
  Count root_vc_width = 256;
  Count min_dim = 8;
  Count step_base = 2;
  int hysteresis_levels = 1;
};

struct SystemConfig {
  Bytes hbm_bytes = 16ll * 1024 * 1024 * 1024;
  double hbm_bw_bytes_per_s = 900e9;
  double clock_hz = 940e6;
  double area_budget_mm2 = 400.0;
  double power_budget_w = 250.0;
  double interconnect_bw_bytes_per_s = 100e9;
  Bytes element_bytes = 2;
  CostModelCoefficients cost;
  SearchConfig search;

  void validate() const;  // throws ParseError on non-positive fields
};

// One architecture candidate: <#TC, TC-Dim, #VC, VC-Width> plus the derived
// buffer sizes and the recomputable area/power of the closed-form model.
struct DesignPoint {
  Count num_tc = 0;
  CoreDims dims;
  Count num_vc = 0;
  Bytes tc_l1_bytes = 512;  // fixed for every design
  Bytes tc_l2_bytes = 0;
  Bytes vc_l2_bytes = 0;
  double area_mm2 = 0.0;
  double tdp_watts = 0.0;

  std::string tuple_string() const;  // "<2, 128x128, 2, 128>"

  friend bool operator==(const DesignPoint& a, const DesignPoint& b) {
    return a.num_tc == b.num_tc && a.dims == b.dims && a.num_vc == b.num_vc;
  }
};

// L2 sizes from core dims: the TC needs input/weight/output tiles double
// buffered to tile_depth_factor; the VC streams vc_l2_factor elements per
// lane.
std::pair<Bytes, Bytes> derive_buffers(const CoreDims& dims,
                                       const SystemConfig& cfg);

double area_of(const DesignPoint& d, const SystemConfig& cfg);
double tdp_of(const DesignPoint& d, const SystemConfig& cfg);
bool within_budget(const DesignPoint& d, const SystemConfig& cfg);

// Per-unit area/power of one core of each type at the given dims, used by
// the ILP's area/power objective.
double tc_unit_area(const CoreDims& dims, const SystemConfig& cfg);
double vc_unit_area(const CoreDims& dims, const SystemConfig& cfg);
double tc_unit_power(const CoreDims& dims, const SystemConfig& cfg);
double vc_unit_power(const CoreDims& dims, const SystemConfig& cfg);

// Builds a DesignPoint with derived buffers and recomputed area/power.
// Throws InvalidDesignError when counts are negative or both zero.
DesignPoint make_design(Count num_tc, const CoreDims& dims, Count num_vc,
                        const SystemConfig& cfg);

// SystemConfig file: JSON object with the field names above plus optional
// "cost_model" and "search" tables. Missing keys keep their defaults.
SystemConfig load_system_config(const std::string& json_text);
SystemConfig load_system_config_file(const std::filesystem::path& path);
std::string system_config_to_json(const SystemConfig& cfg);

}  // namespace wham
