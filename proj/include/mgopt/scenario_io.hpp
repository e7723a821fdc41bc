#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "mgopt/network.hpp"

namespace mgopt {

class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

namespace io_detail {

using nlohmann::json;

template <typename T>
T field(const json& j, const std::string& key, const std::string& ctx) {
  if (!j.contains(key)) throw ParseError(ctx + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(ctx + ": bad field '" + key + "': " + e.what());
  }
}

template <typename T>
T field_or(const json& j, const std::string& key, T def) {
  return j.contains(key) ? j.at(key).get<T>() : def;
}

inline DeviceParams device_from(const json& j, const std::string& ctx) {
  DeviceParams d;
  d.p_min = field<double>(j, "p_min", ctx);
  d.p_max = field<double>(j, "p_max", ctx);
  d.ramp_up = field<double>(j, "ramp_up", ctx);
  d.ramp_down = field<double>(j, "ramp_down", ctx);
  d.p_init = field_or<double>(j, "p_init", d.p_min);
  d.k_op = field<double>(j, "k_op", ctx);
  return d;
}

inline json device_to(const DeviceParams& d) {
  return json{{"p_min", d.p_min},       {"p_max", d.p_max},
              {"ramp_up", d.ramp_up},   {"ramp_down", d.ramp_down},
              {"p_init", d.p_init},     {"k_op", d.k_op}};
}

}  // namespace io_detail

inline Scenario scenario_from_json(const nlohmann::json& j) {
  using io_detail::field;
  using io_detail::field_or;
  using nlohmann::json;

  Scenario sc;
  sc.horizon = field_or<int>(j, "horizon", 24);
  const int T = sc.horizon;

  const json& jn = j.contains("network") ? j.at("network")
                                         : throw ParseError("scenario: missing 'network'");
  Network& net = sc.net;
  net.base_mva = field_or<double>(jn, "base_mva", 10.0);
  net.base_kv = field_or<double>(jn, "base_kv", 12.66);
  net.v_ref = field_or<double>(jn, "v_ref", 1.0);
  net.eps_v = field_or<double>(jn, "eps_v", 0.05);

  for (const auto& jb : field<json>(jn, "buses", "network")) {
    Bus b;
    b.id = field<int>(jb, "id", "bus");
    std::string ctx = "bus " + std::to_string(b.id);
    std::string kind = field_or<std::string>(jb, "kind", "pq");
    if (kind == "slack")
      b.kind = BusKind::Slack;
    else if (kind == "pq")
      b.kind = BusKind::Pq;
    else if (kind == "mg_pcc")
      b.kind = BusKind::MgPcc;
    else
      throw ParseError(ctx + ": unknown kind '" + kind + "'");
    b.load_p = field_or<std::vector<double>>(jb, "load_p", std::vector<double>(T, 0.0));
    b.load_q = field_or<std::vector<double>>(jb, "load_q", std::vector<double>(T, 0.0));
    if (jb.contains("pv")) {
      PvUnit pv;
      pv.capacity_s = field<double>(jb.at("pv"), "capacity_s", ctx + " pv");
      pv.p_mppt = field<std::vector<double>>(jb.at("pv"), "p_mppt", ctx + " pv");
      b.pv = pv;
    }
    b.mg = field_or<int>(jb, "mg", -1);
    net.buses.push_back(std::move(b));
  }
  for (const auto& je : field<nlohmann::json>(jn, "branches", "network")) {
    Branch br;
    br.from_bus = field<int>(je, "from", "branch");
    br.to_bus = field<int>(je, "to", "branch");
    std::string ctx = "branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus);
    br.r = field<double>(je, "r", ctx);
    br.x = field<double>(je, "x", ctx);
    net.branches.push_back(br);
  }

  for (const auto& jm : field_or<nlohmann::json>(j, "mgs", nlohmann::json::array())) {
    MgConfig mg;
    mg.name = io_detail::field_or<std::string>(jm, "name", "MG" + std::to_string(sc.mgs.size() + 1));
    std::string ctx = mg.name;
    const json& jmt = jm.at("mt");
    static_cast<DeviceParams&>(mg.mt) = io_detail::device_from(jmt, ctx + ".mt");
    mg.mt.eta = field<double>(jmt, "eta", ctx + ".mt");
    mg.mt.l_g = field<double>(jmt, "l_g", ctx + ".mt");
    const json& jde = jm.at("de");
    static_cast<DeviceParams&>(mg.de) = io_detail::device_from(jde, ctx + ".de");
    mg.de.k_fu = field<double>(jde, "k_fu", ctx + ".de");
    mg.de.alpha = field<double>(jde, "alpha", ctx + ".de");
    mg.de.beta = field<double>(jde, "beta", ctx + ".de");
    mg.de.gamma = field<double>(jde, "gamma", ctx + ".de");
    mg.de.fuel_p_base = field_or<double>(jde, "fuel_p_base", mg.de.p_max);
    const json& jb = jm.at("bess");
    mg.bess.capacity = field<double>(jb, "capacity", ctx + ".bess");
    mg.bess.p_max = field<double>(jb, "p_max", ctx + ".bess");
    mg.bess.eta_ch = field_or<double>(jb, "eta_ch", 0.92);
    mg.bess.eta_dis = field_or<double>(jb, "eta_dis", 0.92);
    mg.bess.soc_min = field_or<double>(jb, "soc_min", 0.2);
    mg.bess.soc_max = field_or<double>(jb, "soc_max", 0.9);
    mg.bess.soc0 = field_or<double>(jb, "soc0", 0.5);
    mg.bess.zeta = field_or<double>(jb, "zeta", 0.123);
    mg.load = field<std::vector<double>>(jm, "load", ctx);
    mg.pv = field_or<std::vector<double>>(jm, "pv", std::vector<double>(T, 0.0));
    mg.wind = field_or<std::vector<double>>(jm, "wind", std::vector<double>(T, 0.0));
    mg.pcc_cap = field_or<double>(jm, "pcc_cap", 500.0);
    mg.q_env_frac = field_or<double>(jm, "q_env_frac", 0.4);
    sc.mgs.push_back(std::move(mg));
  }

  if (j.contains("admm")) {
    const json& ja = j.at("admm");
    sc.admm.rho0 = field_or<double>(ja, "rho0", 250.0);
    sc.admm.eps = field_or<double>(ja, "eps", 1e-6);
    sc.admm.max_iter = field_or<int>(ja, "max_iter", 500);
    sc.admm.strategy = field_or<std::string>(ja, "strategy", "improved");
    sc.admm.sigma = field_or<int>(ja, "sigma", 3);
    sc.admm.mu_ratio = field_or<double>(ja, "mu_ratio", 10.0);
    sc.admm.relaxation = field_or<double>(ja, "relaxation", 1.7);
  }

  sc.gas_price = j.contains("prices")
                     ? field<std::vector<double>>(j.at("prices"), "gas", "prices")
                     : std::vector<double>(T, 0.375);
  if (static_cast<int>(sc.gas_price.size()) != T)
    throw ParseError("prices.gas must have " + std::to_string(T) + " entries");
  for (double g : sc.gas_price)
    if (g <= 0.0) throw ParseError("prices.gas entries must be > 0");
  return sc;
}

inline nlohmann::json scenario_to_json(const Scenario& sc) {
  using nlohmann::json;
  json j;
  j["horizon"] = sc.horizon;
  json jn;
  jn["base_mva"] = sc.net.base_mva;
  jn["base_kv"] = sc.net.base_kv;
  jn["v_ref"] = sc.net.v_ref;
  jn["eps_v"] = sc.net.eps_v;
  jn["buses"] = json::array();
  for (const auto& b : sc.net.buses) {
    json jb;
    jb["id"] = b.id;
    jb["kind"] = b.kind == BusKind::Slack ? "slack" : b.kind == BusKind::MgPcc ? "mg_pcc" : "pq";
    jb["load_p"] = b.load_p;
    jb["load_q"] = b.load_q;
    if (b.pv) jb["pv"] = {{"capacity_s", b.pv->capacity_s}, {"p_mppt", b.pv->p_mppt}};
    if (b.mg >= 0) jb["mg"] = b.mg;
    jn["buses"].push_back(std::move(jb));
  }
  jn["branches"] = json::array();
  for (const auto& br : sc.net.branches)
    jn["branches"].push_back({{"from", br.from_bus}, {"to", br.to_bus}, {"r", br.r}, {"x", br.x}});
  j["network"] = std::move(jn);

  j["mgs"] = json::array();
  for (const auto& mg : sc.mgs) {
    json jm;
    jm["name"] = mg.name;
    jm["mt"] = io_detail::device_to(mg.mt);
    jm["mt"]["eta"] = mg.mt.eta;
    jm["mt"]["l_g"] = mg.mt.l_g;
    jm["de"] = io_detail::device_to(mg.de);
    jm["de"]["k_fu"] = mg.de.k_fu;
    jm["de"]["alpha"] = mg.de.alpha;
    jm["de"]["beta"] = mg.de.beta;
    jm["de"]["gamma"] = mg.de.gamma;
    jm["de"]["fuel_p_base"] = mg.de.fuel_p_base;
    jm["bess"] = {{"capacity", mg.bess.capacity}, {"p_max", mg.bess.p_max},
                  {"eta_ch", mg.bess.eta_ch},     {"eta_dis", mg.bess.eta_dis},
                  {"soc_min", mg.bess.soc_min},   {"soc_max", mg.bess.soc_max},
                  {"soc0", mg.bess.soc0},         {"zeta", mg.bess.zeta}};
    jm["load"] = mg.load;
    jm["pv"] = mg.pv;
    jm["wind"] = mg.wind;
    jm["pcc_cap"] = mg.pcc_cap;
    jm["q_env_frac"] = mg.q_env_frac;
    j["mgs"].push_back(std::move(jm));
  }

  j["admm"] = {{"rho0", sc.admm.rho0},     {"eps", sc.admm.eps},
               {"max_iter", sc.admm.max_iter}, {"strategy", sc.admm.strategy},
               {"sigma", sc.admm.sigma},   {"mu_ratio", sc.admm.mu_ratio},
               {"relaxation", sc.admm.relaxation}};
  j["prices"] = {{"gas", sc.gas_price}};
  return j;
}

/// Loads and validates a scenario file. Throws ParseError on malformed
/// input and ValidationError on violated network invariants.
inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  Scenario sc = scenario_from_json(j);
  require_valid(sc.net, sc.horizon);
  // cross checks between network and MG list
  int pcc_count = 0;
  for (const auto& b : sc.net.buses)
    if (b.kind == BusKind::MgPcc) {
      pcc_count++;
      if (b.mg < 0 || b.mg >= static_cast<int>(sc.mgs.size()))
        throw ValidationError("bus " + std::to_string(b.id) + ": mg index out of range");
    }
  if (pcc_count != static_cast<int>(sc.mgs.size()))
    throw ValidationError("number of mg_pcc buses does not match mgs list");
  for (const auto& mg : sc.mgs) {
    if (static_cast<int>(mg.load.size()) != sc.horizon ||
        static_cast<int>(mg.pv.size()) != sc.horizon ||
        static_cast<int>(mg.wind.size()) != sc.horizon)
      throw ValidationError(mg.name + ": profile arrays must have " +
                            std::to_string(sc.horizon) + " entries");
    if (!(mg.bess.soc_min < mg.bess.soc0 && mg.bess.soc0 < mg.bess.soc_max &&
          mg.bess.soc_max <= 1.0 && mg.bess.soc_min > 0.0))
      throw ValidationError(mg.name + ": SOC limits must satisfy 0 < min < soc0 < max <= 1");
  }
  return sc;
}

inline void save_scenario(const Scenario& sc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scenario file: " + path);
  out << scenario_to_json(sc).dump(1) << "\n";
}

}  // namespace mgopt
