#pragma once

#include <array>
#include <cmath>

#include "mgopt/network.hpp"

namespace mgopt {

/// Placement options for the bundled case; defaults keep the DERs
/// electrically dispersed over the three main laterals.
struct Ieee33Options {
  std::array<int, 4> pv_buses{7, 14, 24, 30};
  std::array<double, 4> pv_ratings_kw{500.0, 700.0, 600.0, 800.0};
  std::array<int, 3> mg_buses{12, 22, 29};
  int horizon = 24;
};

namespace profiles {

/// Clear-sky PV shape: zero before 6h and after 19h, bell peaking at 100%
/// of rating around 12-13h. t is the hour index 0..23.
inline double pv_shape(int t) {
  double h = t + 0.5;
  if (h < 6.0 || h > 19.0) return 0.0;
  double s = std::sin(M_PI * (h - 6.0) / 13.0);
  return s * s;
}

/// Two-peak feeder load shape: peaks at 11h and 20h, valley at 3h of half
/// the peak. The daily maximum is ~0.85 of the nominal bus loading: at the
/// full nominal value the evening peak leaves no room inside the +-5%
/// voltage band, with or without control.
inline double dn_load_shape(int t) {
  double h = t + 0.5;
  double base = 0.5;
  double morning = 0.35 * std::exp(-0.5 * std::pow((h - 11.0) / 3.0, 2.0));
  double evening = 0.35 * std::exp(-0.5 * std::pow((h - 20.0) / 2.5, 2.0));
  double dip = 0.078 * std::exp(-0.5 * std::pow((h - 3.0) / 2.5, 2.0));
  return base + morning + evening - dip;
}

/// MG internal load: flatter industrial-style curve with an evening rise.
inline double mg_load_shape(int t) {
  double h = t + 0.5;
  return 0.55 + 0.25 * std::exp(-0.5 * std::pow((h - 19.0) / 3.0, 2.0)) +
         0.15 * std::exp(-0.5 * std::pow((h - 10.0) / 4.0, 2.0));
}

/// Wind: stronger at night, dipping mid-day.
inline double wind_shape(int t) {
  double h = t + 0.5;
  return 0.6 + 0.3 * std::cos(2.0 * M_PI * (h - 1.0) / 24.0);
}

}  // namespace profiles

namespace detail {

struct Bw33Row {
  int from, to;
  double r_ohm, x_ohm, p_kw, q_kvar;  // load at the "to" bus
};

// Baran-Wu 33-bus feeder: line impedances in ohms, nominal loads at the
// receiving bus. 12.66 kV, total load 3715 kW / 2300 kvar.
inline const std::array<Bw33Row, 32>& bw33_rows() {
  static const std::array<Bw33Row, 32> rows{{
      {1, 2, 0.0922, 0.0470, 100, 60},   {2, 3, 0.4930, 0.2511, 90, 40},
      {3, 4, 0.3660, 0.1864, 120, 80},   {4, 5, 0.3811, 0.1941, 60, 30},
      {5, 6, 0.8190, 0.7070, 60, 20},    {6, 7, 0.1872, 0.6188, 200, 100},
      {7, 8, 0.7114, 0.2351, 200, 100},  {8, 9, 1.0300, 0.7400, 60, 20},
      {9, 10, 1.0440, 0.7400, 60, 20},   {10, 11, 0.1966, 0.0650, 45, 30},
      {11, 12, 0.3744, 0.1238, 60, 35},  {12, 13, 1.4680, 1.1550, 60, 35},
      {13, 14, 0.5416, 0.7129, 120, 80}, {14, 15, 0.5910, 0.5260, 60, 10},
      {15, 16, 0.7463, 0.5450, 60, 20},  {16, 17, 1.2890, 1.7210, 60, 20},
      {17, 18, 0.7320, 0.5740, 90, 40},  {2, 19, 0.1640, 0.1565, 90, 40},
      {19, 20, 1.5042, 1.3554, 90, 40},  {20, 21, 0.4095, 0.4784, 90, 40},
      {21, 22, 0.7089, 0.9373, 90, 40},  {3, 23, 0.4512, 0.3083, 90, 50},
      {23, 24, 0.8980, 0.7091, 420, 200}, {24, 25, 0.8960, 0.7011, 420, 200},
      {6, 26, 0.2030, 0.1034, 60, 25},   {26, 27, 0.2842, 0.1447, 60, 25},
      {27, 28, 1.0590, 0.9337, 60, 20},  {28, 29, 0.8042, 0.7006, 120, 70},
      {29, 30, 0.5075, 0.2585, 200, 600}, {30, 31, 0.9744, 0.9630, 150, 70},
      {31, 32, 0.3105, 0.3619, 210, 100}, {32, 33, 0.3410, 0.5302, 60, 40},
  }};
  return rows;
}

inline MgConfig default_mg(const std::string& name, double bess_e, double bess_p,
                           double load_peak, double wind_peak, double pv_peak, int T) {
  MgConfig mg;
  mg.name = name;
  mg.mt.p_min = 10.0;
  mg.mt.p_max = 300.0;
  mg.mt.ramp_up = 120.0;
  mg.mt.ramp_down = 180.0;
  mg.mt.p_init = 10.0;
  mg.mt.k_op = 0.0126;
  mg.mt.eta = 0.30;
  mg.mt.l_g = 9.7;
  mg.de.p_min = 5.0;
  mg.de.p_max = 300.0;
  mg.de.ramp_up = 160.0;
  mg.de.ramp_down = 180.0;
  mg.de.p_init = 10.0;
  mg.de.k_op = 0.0063;
  mg.de.k_fu = 0.8;
  mg.de.alpha = 2.6667;
  mg.de.beta = 0.1637;
  mg.de.gamma = 0.00015;
  mg.de.fuel_p_base = 300.0;
  mg.bess.capacity = bess_e;
  mg.bess.p_max = bess_p;
  mg.load.resize(T);
  mg.pv.resize(T);
  mg.wind.resize(T);
  for (int t = 0; t < T; ++t) {
    mg.load[t] = load_peak * profiles::mg_load_shape(t);
    mg.pv[t] = pv_peak * profiles::pv_shape(t);
    mg.wind[t] = wind_peak * profiles::wind_shape(t);
  }
  return mg;
}

}  // namespace detail

/// Dynamic gas price schedule of the bundled case [$ / m3].
inline std::vector<double> ieee33_gas_prices(int T = 24) {
  std::vector<double> p(T, 0.328);
  for (int t = 0; t < T; ++t) {
    int h = t + 1;  // 1-based hour
    if ((h >= 8 && h <= 11) || (h >= 16 && h <= 18))
      p[t] = 0.406;
    else if ((h >= 6 && h <= 7) || (h >= 12 && h <= 15) || (h >= 19 && h <= 21))
      p[t] = 0.375;
  }
  return p;
}

/// The bundled modified IEEE 33-bus case: Baran-Wu feeder data plus three
/// MG PCC buses and four PV units. All profile arrays are synthetic and
/// can be replaced through the scenario file.
inline Scenario ieee33_case(const Ieee33Options& opt = {}) {
  Scenario sc;
  const int T = opt.horizon;
  sc.horizon = T;
  sc.gas_price = ieee33_gas_prices(T);

  Network& net = sc.net;
  net.base_mva = 10.0;
  net.base_kv = 12.66;
  net.v_ref = 1.0;
  net.eps_v = 0.05;
  const double z_base = net.base_kv * net.base_kv / net.base_mva;

  net.buses.resize(33);
  for (int i = 0; i < 33; ++i) {
    net.buses[i].id = i + 1;
    net.buses[i].kind = i == 0 ? BusKind::Slack : BusKind::Pq;
    net.buses[i].load_p.assign(T, 0.0);
    net.buses[i].load_q.assign(T, 0.0);
  }
  for (const auto& row : detail::bw33_rows()) {
    net.branches.push_back({row.from, row.to, row.r_ohm / z_base, row.x_ohm / z_base});
    Bus& b = net.buses[row.to - 1];
    for (int t = 0; t < T; ++t) {
      double s = profiles::dn_load_shape(t);
      b.load_p[t] = row.p_kw * s;
      b.load_q[t] = row.q_kvar * s;
    }
  }
  for (std::size_t k = 0; k < opt.pv_buses.size(); ++k) {
    PvUnit pv;
    // inverters sized 10% above the panel rating so reactive capability
    // survives at the midday MPPT peak
    pv.capacity_s = 1.1 * opt.pv_ratings_kw[k];
    pv.p_mppt.resize(T);
    for (int t = 0; t < T; ++t) pv.p_mppt[t] = opt.pv_ratings_kw[k] * profiles::pv_shape(t);
    net.buses[opt.pv_buses[k] - 1].pv = pv;
  }

  sc.mgs.push_back(detail::default_mg("MG1", 500.0, 100.0, 260.0, 120.0, 80.0, T));
  sc.mgs.push_back(detail::default_mg("MG2", 800.0, 120.0, 300.0, 150.0, 100.0, T));
  sc.mgs.push_back(detail::default_mg("MG3", 800.0, 120.0, 280.0, 100.0, 120.0, T));
  for (std::size_t w = 0; w < opt.mg_buses.size(); ++w) {
    Bus& b = net.buses[opt.mg_buses[w] - 1];
    b.kind = BusKind::MgPcc;
    b.mg = static_cast<int>(w);
  }

  sc.admm = AdmmConfig{};
  return sc;
}

}  // namespace mgopt
