#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgopt {

enum class BusKind { Slack, Pq, MgPcc };

struct PvUnit {
  double capacity_s = 0.0;          // inverter apparent-power rating [kVA]
  std::vector<double> p_mppt;       // MPPT active-power profile per hour [kW]
};

struct DeviceParams {
  double p_min = 0.0, p_max = 0.0;  // [kW]
  double ramp_up = 0.0, ramp_down = 0.0;  // [kW/h]
  double p_init = 0.0;              // ramp anchor at t = 0 [kW]
  double k_op = 0.0;                // O&M cost [$/kWh]
};

struct MtParams : DeviceParams {
  double eta = 0.3;                 // generation efficiency
  double l_g = 9.7;                 // gas low calorific value [kWh/m3]
};

struct DeParams : DeviceParams {
  double k_fu = 0.0;                // diesel price [$/L]
  double alpha = 0.0, beta = 0.0, gamma = 0.0;  // fuel curve coefficients
  double fuel_p_base = 1.0;         // normalization base for the fuel curve [kW]
};

struct BessParams {
  double capacity = 0.0;            // E [kWh]
  double p_max = 0.0;               // charge/discharge limit [kW]
  double eta_ch = 0.92, eta_dis = 0.92;
  double soc_min = 0.2, soc_max = 0.9, soc0 = 0.5;
  double zeta = 0.123;              // degradation factor [$/kW]
};

struct MgConfig {
  std::string name;
  MtParams mt;
  DeParams de;
  BessParams bess;
  std::vector<double> load;         // per hour [kW]
  std::vector<double> pv;           // per hour [kW]
  std::vector<double> wind;         // per hour [kW]
  double pcc_cap = 500.0;           // |P_pcc| cap at the DN side [kW]
  double q_env_frac = 0.4;          // |Q_pcc| <= q_env_frac * pcc_cap
};

struct Bus {
  int id = 0;
  BusKind kind = BusKind::Pq;
  std::vector<double> load_p;       // per hour [kW]
  std::vector<double> load_q;       // per hour [kvar]
  std::optional<PvUnit> pv;
  int mg = -1;                      // index into Scenario::mgs, mg_pcc buses only
};

struct Branch {
  int from_bus = 0, to_bus = 0;
  double r = 0.0, x = 0.0;          // [p.u.]
};

struct AdmmConfig {
  double rho0 = 250.0;
  double eps = 1e-6;
  int max_iter = 500;
  std::string strategy = "improved";  // fixed | adaptive | improved
  int sigma = 3;
  double mu_ratio = 10.0;
  double relaxation = 1.7;  // over-relaxation factor in (0, 2)
};

struct Network {
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  double v_ref = 1.0;               // slack voltage [p.u.]
  double base_mva = 10.0;
  double base_kv = 12.66;
  double eps_v = 0.05;              // allowable voltage deviation [p.u.]

  int index_of(int bus_id) const {
    for (std::size_t i = 0; i < buses.size(); ++i)
      if (buses[i].id == bus_id) return static_cast<int>(i);
    throw std::out_of_range("unknown bus id " + std::to_string(bus_id));
  }
  int slack_index() const {
    for (std::size_t i = 0; i < buses.size(); ++i)
      if (buses[i].kind == BusKind::Slack) return static_cast<int>(i);
    throw std::runtime_error("network has no slack bus");
  }
  // kW -> p.u.
  double to_pu(double kw) const { return kw / (base_mva * 1000.0); }
  double to_kw(double pu) const { return pu * base_mva * 1000.0; }
};

struct Scenario {
  int horizon = 24;
  Network net;
  std::vector<MgConfig> mgs;
  AdmmConfig admm;
  std::vector<double> gas_price;    // [$ / m3], per hour
};

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void bfs_reach(const Network& net, int start, std::vector<char>& seen) {
  std::vector<std::vector<int>> adj(net.buses.size());
  for (const auto& br : net.branches) {
    int a = net.index_of(br.from_bus), b = net.index_of(br.to_bus);
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<int> stack{start};
  seen.assign(net.buses.size(), 0);
  seen[start] = 1;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int v : adj[u])
      if (!seen[v]) {
        seen[v] = 1;
        stack.push_back(v);
      }
  }
}

}  // namespace detail

/// Checks every network invariant; one entry per violation, empty means valid.
inline std::vector<std::string> validate(const Network& net, int horizon = 24) {
  std::vector<std::string> v;
  int slack_count = 0;
  std::map<int, int> id_count;
  for (const auto& b : net.buses) {
    id_count[b.id]++;
    if (b.kind == BusKind::Slack) slack_count++;
    if (static_cast<int>(b.load_p.size()) != horizon ||
        static_cast<int>(b.load_q.size()) != horizon)
      v.push_back("bus " + std::to_string(b.id) + ": load profile must have " +
                  std::to_string(horizon) + " entries");
    if (b.kind == BusKind::MgPcc && b.mg < 0)
      v.push_back("bus " + std::to_string(b.id) + ": mg_pcc bus lacks an MG config");
    if (b.kind != BusKind::MgPcc && b.mg >= 0)
      v.push_back("bus " + std::to_string(b.id) + ": non-PCC bus carries an MG config");
    if (b.pv) {
      if (static_cast<int>(b.pv->p_mppt.size()) != horizon)
        v.push_back("bus " + std::to_string(b.id) + ": pv profile must have " +
                    std::to_string(horizon) + " entries");
      for (double p : b.pv->p_mppt)
        if (p < 0.0 || p > b.pv->capacity_s + 1e-9) {
          v.push_back("bus " + std::to_string(b.id) + ": pv p_mppt outside [0, capacity]");
          break;
        }
    }
  }
  for (auto& [id, n] : id_count)
    if (n > 1) v.push_back("duplicate bus id " + std::to_string(id));
  if (slack_count == 0) v.push_back("no slack bus");
  if (slack_count > 1) v.push_back("multiple slack buses");

  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& br : net.branches) {
    std::string tag = "branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus);
    if (br.r <= 0.0) v.push_back(tag + ": r must be > 0");
    if (br.x <= 0.0) v.push_back(tag + ": x must be > 0");
    if (br.from_bus == br.to_bus) v.push_back(tag + ": self-loop");
    if (!id_count.count(br.from_bus) || !id_count.count(br.to_bus)) {
      v.push_back(tag + ": endpoint references unknown bus");
      continue;
    }
    auto key = std::minmax(br.from_bus, br.to_bus);
    if (++edge_count[{key.first, key.second}] > 1) v.push_back(tag + ": duplicate edge");
  }

  bool refs_ok = v.empty() || std::none_of(v.begin(), v.end(), [](const std::string& s) {
                   return s.find("unknown bus") != std::string::npos ||
                          s.find("duplicate bus") != std::string::npos;
                 });
  if (refs_ok && slack_count == 1) {
    if (net.branches.size() + 1 != net.buses.size()) {
      v.push_back("not radial: |branches| != |buses| - 1");
    } else {
      std::vector<char> seen;
      detail::bfs_reach(net, net.slack_index(), seen);
      for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i]) {
          v.push_back("not connected: bus " + std::to_string(net.buses[i].id) +
                      " unreachable from slack");
          break;
        }
    }
  }
  return v;
}

inline void require_valid(const Network& net, int horizon = 24) {
  auto v = validate(net, horizon);
  if (!v.empty()) throw ValidationError(v.front());
}

/// Tree structure rooted at the slack: parent branch index per bus (-1 at root).
struct RootedTree {
  std::vector<int> parent;        // parent bus index, -1 at slack
  std::vector<int> parent_branch; // branch index to parent, -1 at slack
  std::vector<std::vector<int>> children;       // child bus indices
  std::vector<std::vector<int>> child_branch;   // matching branch indices
  std::vector<int> order;         // bus indices, parents before children
};

inline RootedTree root_at_slack(const Network& net) {
  const int n = static_cast<int>(net.buses.size());
  RootedTree t;
  t.parent.assign(n, -1);
  t.parent_branch.assign(n, -1);
  t.children.resize(n);
  t.child_branch.resize(n);
  std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbor, branch idx)
  for (std::size_t e = 0; e < net.branches.size(); ++e) {
    int a = net.index_of(net.branches[e].from_bus);
    int b = net.index_of(net.branches[e].to_bus);
    adj[a].push_back({b, static_cast<int>(e)});
    adj[b].push_back({a, static_cast<int>(e)});
  }
  int root = net.slack_index();
  std::vector<char> seen(n, 0);
  std::vector<int> queue{root};
  seen[root] = 1;
  for (std::size_t qi = 0; qi < queue.size(); ++qi) {
    int u = queue[qi];
    t.order.push_back(u);
    for (auto [v, e] : adj[u])
      if (!seen[v]) {
        seen[v] = 1;
        t.parent[v] = u;
        t.parent_branch[v] = e;
        t.children[u].push_back(v);
        t.child_branch[u].push_back(e);
        queue.push_back(v);
      }
  }
  return t;
}

}  // namespace mgopt
