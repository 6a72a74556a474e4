#include "wham/arch.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace wham {

namespace {
constexpr double kMiB = 1024.0 * 1024.0;
}

void SystemConfig::validate() const {
  auto positive = [](double v, const char* what) {
    if (!(v > 0)) {
      throw ParseError(std::string("system config: ") + what +
                       " must be strictly positive");
    }
  };
  positive(static_cast<double>(hbm_bytes), "hbm_bytes");
  positive(hbm_bw_bytes_per_s, "hbm_bw_bytes_per_s");
  positive(clock_hz, "clock_hz");
  positive(area_budget_mm2, "area_budget_mm2");
  positive(power_budget_w, "power_budget_w");
  positive(interconnect_bw_bytes_per_s, "interconnect_bw_bytes_per_s");
  positive(static_cast<double>(element_bytes), "element_bytes");
  positive(static_cast<double>(cost.tile_depth_factor), "tile_depth_factor");
  positive(static_cast<double>(cost.vc_l2_factor), "vc_l2_factor");
  positive(static_cast<double>(search.min_dim), "min_dim");
  if (search.step_base < 2) {
    throw ParseError("system config: step_base must be >= 2");
  }
  if (search.hysteresis_levels < 0) {
    throw ParseError("system config: hysteresis_levels must be >= 0");
  }
}

std::string DesignPoint::tuple_string() const {
  std::ostringstream os;
  os << "<" << num_tc << ", " << dims.tc_rows << "x" << dims.tc_cols << ", "
     << num_vc << ", " << dims.vc_width << ">";
  return os.str();
}

std::pair<Bytes, Bytes> derive_buffers(const CoreDims& dims,
                                       const SystemConfig& cfg) {
  Bytes tc_l2 = 3 * dims.tc_rows * dims.tc_cols * cfg.element_bytes *
                cfg.cost.tile_depth_factor;
  Bytes vc_l2 = cfg.cost.vc_l2_factor * dims.vc_width * cfg.element_bytes;
  return {tc_l2, vc_l2};
}

double tc_unit_area(const CoreDims& dims, const SystemConfig& cfg) {
  auto [tc_l2, vc_l2] = derive_buffers(dims, cfg);
  (void)vc_l2;
  return cfg.cost.a_pe * static_cast<double>(dims.tc_rows * dims.tc_cols) +
         cfg.cost.a_sram * static_cast<double>(tc_l2) / kMiB;
}

double vc_unit_area(const CoreDims& dims, const SystemConfig& cfg) {
  auto [tc_l2, vc_l2] = derive_buffers(dims, cfg);
  (void)tc_l2;
  return cfg.cost.a_lane * static_cast<double>(dims.vc_width) +
         cfg.cost.a_sram * static_cast<double>(vc_l2) / kMiB;
}

double tc_unit_power(const CoreDims& dims, const SystemConfig& cfg) {
  auto [tc_l2, vc_l2] = derive_buffers(dims, cfg);
  (void)vc_l2;
  return cfg.cost.p_pe * static_cast<double>(dims.tc_rows * dims.tc_cols) +
         cfg.cost.p_sram * static_cast<double>(tc_l2) / kMiB;
}

double vc_unit_power(const CoreDims& dims, const SystemConfig& cfg) {
  auto [tc_l2, vc_l2] = derive_buffers(dims, cfg);
  (void)tc_l2;
  return cfg.cost.p_lane * static_cast<double>(dims.vc_width) +
         cfg.cost.p_sram * static_cast<double>(vc_l2) / kMiB;
}

double area_of(const DesignPoint& d, const SystemConfig& cfg) {
  return static_cast<double>(d.num_tc) * tc_unit_area(d.dims, cfg) +
         static_cast<double>(d.num_vc) * vc_unit_area(d.dims, cfg) +
         cfg.cost.a_fixed;
}

double tdp_of(const DesignPoint& d, const SystemConfig& cfg) {
  return static_cast<double>(d.num_tc) * tc_unit_power(d.dims, cfg) +
         static_cast<double>(d.num_vc) * vc_unit_power(d.dims, cfg) +
         cfg.cost.p_fixed;
}

bool within_budget(const DesignPoint& d, const SystemConfig& cfg) {
  return area_of(d, cfg) <= cfg.area_budget_mm2 &&
         tdp_of(d, cfg) <= cfg.power_budget_w;
}

DesignPoint make_design(Count num_tc, const CoreDims& dims, Count num_vc,
                        const SystemConfig& cfg) {
  if (num_tc < 0 || num_vc < 0 || num_tc + num_vc < 1) {
    throw InvalidDesignError("design needs non-negative counts and at least "
                             "one core");
  }
  if (dims.tc_rows < 1 || dims.tc_cols < 1 || dims.vc_width < 1) {
    throw InvalidDesignError("core dims must be >= 1");
  }
  DesignPoint d;
  d.num_tc = num_tc;
  d.dims = dims;
  d.num_vc = num_vc;
  std::tie(d.tc_l2_bytes, d.vc_l2_bytes) = derive_buffers(dims, cfg);
  d.area_mm2 = area_of(d, cfg);
  d.tdp_watts = tdp_of(d, cfg);
  return d;
}

namespace {

using nlohmann::json;

template <typename T>
void read_if(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj[key].get<T>();
}

}  // namespace

SystemConfig load_system_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("system config is not valid JSON: ") +
                     e.what());
  }
  if (!doc.is_object()) throw ParseError("system config must be an object");

  SystemConfig cfg;
  try {
    read_if(doc, "hbm_bytes", cfg.hbm_bytes);
    read_if(doc, "hbm_bw_bytes_per_s", cfg.hbm_bw_bytes_per_s);
    read_if(doc, "clock_hz", cfg.clock_hz);
    read_if(doc, "area_budget_mm2", cfg.area_budget_mm2);
    read_if(doc, "power_budget_w", cfg.power_budget_w);
    read_if(doc, "interconnect_bw_bytes_per_s",
            cfg.interconnect_bw_bytes_per_s);
    read_if(doc, "element_bytes", cfg.element_bytes);
    if (doc.contains("cost_model")) {
      const json& cm = doc["cost_model"];
      read_if(cm, "a_pe", cfg.cost.a_pe);
      read_if(cm, "a_lane", cfg.cost.a_lane);
      read_if(cm, "a_sram", cfg.cost.a_sram);
      read_if(cm, "a_fixed", cfg.cost.a_fixed);
      read_if(cm, "p_pe", cfg.cost.p_pe);
      read_if(cm, "p_lane", cfg.cost.p_lane);
      read_if(cm, "p_sram", cfg.cost.p_sram);
      read_if(cm, "p_fixed", cfg.cost.p_fixed);
      read_if(cm, "e_mac", cfg.cost.e_mac);
      read_if(cm, "e_vec", cfg.cost.e_vec);
      read_if(cm, "e_hbm", cfg.cost.e_hbm);
      read_if(cm, "e_sram", cfg.cost.e_sram);
      read_if(cm, "tile_depth_factor", cfg.cost.tile_depth_factor);
      read_if(cm, "vc_l2_factor", cfg.cost.vc_l2_factor);
      read_if(cm, "optimizer_state_multiplier",
              cfg.cost.optimizer_state_multiplier);
    }
    if (doc.contains("search")) {
      const json& s = doc["search"];
      read_if(s, "root_tc_rows", cfg.search.root_tc_rows);
      read_if(s, "root_tc_cols", cfg.search.root_tc_cols);
      read_if(s, "root_vc_width", cfg.search.root_vc_width);
      read_if(s, "min_dim", cfg.search.min_dim);
      read_if(s, "step_base", cfg.search.step_base);
      read_if(s, "hysteresis_levels", cfg.search.hysteresis_levels);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("system config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

SystemConfig load_system_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open system config: " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_system_config(buf.str());
}

std::string system_config_to_json(const SystemConfig& cfg) {
  json doc;
  doc["hbm_bytes"] = cfg.hbm_bytes;
  doc["hbm_bw_bytes_per_s"] = cfg.hbm_bw_bytes_per_s;
  doc["clock_hz"] = cfg.clock_hz;
  doc["area_budget_mm2"] = cfg.area_budget_mm2;
  doc["power_budget_w"] = cfg.power_budget_w;
  doc["interconnect_bw_bytes_per_s"] = cfg.interconnect_bw_bytes_per_s;
  doc["element_bytes"] = cfg.element_bytes;
  json cm;
  cm["a_pe"] = cfg.cost.a_pe;
  cm["a_lane"] = cfg.cost.a_lane;
  cm["a_sram"] = cfg.cost.a_sram;
  cm["a_fixed"] = cfg.cost.a_fixed;
  cm["p_pe"] = cfg.cost.p_pe;
  cm["p_lane"] = cfg.cost.p_lane;
  cm["p_sram"] = cfg.cost.p_sram;
  cm["p_fixed"] = cfg.cost.p_fixed;
  cm["e_mac"] = cfg.cost.e_mac;
  cm["e_vec"] = cfg.cost.e_vec;
  cm["e_hbm"] = cfg.cost.e_hbm;
  cm["e_sram"] = cfg.cost.e_sram;
  cm["tile_depth_factor"] = cfg.cost.tile_depth_factor;
  cm["vc_l2_factor"] = cfg.cost.vc_l2_factor;
  cm["optimizer_state_multiplier"] = cfg.cost.optimizer_state_multiplier;
  doc["cost_model"] = std::move(cm);
  json s;
  s["root_tc_rows"] = cfg.search.root_tc_rows;
  s["root_tc_cols"] = cfg.search.root_tc_cols;
  s["root_vc_width"] = cfg.search.root_vc_width;
  s["min_dim"] = cfg.search.min_dim;
  s["step_base"] = cfg.search.step_base;
  s["hysteresis_levels"] = cfg.search.hysteresis_levels;
  doc["search"] = std::move(s);
  return doc.dump(2) + "\n";
}

}  // namespace wham
