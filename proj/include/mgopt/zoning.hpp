#pragma once

#include <vector>

#include "mgopt/network.hpp"
#include "mgopt/power_flow.hpp"

namespace mgopt {

struct OverlapBranch {
  int branch = -1;              // index into Network::branches
  int zone_a = -1, zone_b = -1; // zone_a < zone_b
};

struct ZonePartition {
  std::vector<int> assignment;  // bus index -> zone id
  int zone_count = 0;           // zone w contains MG_w's PCC
  std::vector<OverlapBranch> overlaps;

  bool operator==(const ZonePartition& o) const {
    return assignment == o.assignment && zone_count == o.zone_count;
  }
};

/// Cut edges of an assignment: branches whose endpoints lie in different zones.
inline std::vector<OverlapBranch> overlap_branches(const std::vector<int>& assignment,
                                                   const Network& net) {
  std::vector<OverlapBranch> out;
  for (std::size_t e = 0; e < net.branches.size(); ++e) {
    int za = assignment[net.index_of(net.branches[e].from_bus)];
    int zb = assignment[net.index_of(net.branches[e].to_bus)];
    if (za != zb) out.push_back({static_cast<int>(e), std::min(za, zb), std::max(za, zb)});
  }
  return out;
}

/// Reassigns every node that cannot reach its zone's MG PCC through
/// intra-zone edges to its tree-parent's zone, iterated to fixpoint.
inline std::vector<int> repair_connectivity(std::vector<int> assignment, const Network& net,
                                            const std::vector<int>& pcc_bus_per_zone) {
  const int n = static_cast<int>(net.buses.size());
  const RootedTree tree = root_at_slack(net);
  const int slack = net.slack_index();
  std::vector<std::vector<int>> adj(n);
  for (const auto& br : net.branches) {
    int a = net.index_of(br.from_bus), b = net.index_of(br.to_bus);
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  for (bool changed = true; changed;) {
    changed = false;
    // intra-zone reachability from each zone's PCC
    std::vector<char> reached(n, 0);
    for (std::size_t z = 0; z < pcc_bus_per_zone.size(); ++z) {
      int start = pcc_bus_per_zone[z];
      if (assignment[start] != static_cast<int>(z)) continue;  // PCC never reassigned
      std::vector<int> stack{start};
      reached[start] = 1;
      while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        for (int v : adj[u])
          if (!reached[v] && assignment[v] == assignment[u]) {
            reached[v] = 1;
            stack.push_back(v);
          }
      }
    }
    for (int i : tree.order) {
      if (i == slack || reached[i]) continue;
      bool is_pcc = false;
      for (int p : pcc_bus_per_zone) is_pcc |= (p == i);
      if (is_pcc) continue;
      int pz = assignment[tree.parent[i]];
      if (assignment[i] != pz) {
        assignment[i] = pz;
        changed = true;
      }
    }
  }
  // slack joins the zone of its physically adjacent bus
  if (!tree.children[slack].empty()) assignment[slack] = assignment[tree.children[slack][0]];
  return assignment;
}

/// Sensitivity-based partition: argmax of dv_dp per PQ node (ties to the
/// lowest zone id), slack placed with its adjacent bus, connectivity
/// repaired, overlaps computed.
inline ZonePartition partition(const SensitivityMatrix& sens, const Network& net) {
  const int r = static_cast<int>(sens.col_buses.size());
  if (r == 0) throw std::invalid_argument("partition: empty MG list");
  const int n = static_cast<int>(net.buses.size());
  ZonePartition part;
  part.zone_count = r;
  part.assignment.assign(n, 0);

  for (std::size_t row = 0; row < sens.row_buses.size(); ++row) {
    int best = 0;
    for (int w = 1; w < r; ++w)
      if (sens.dv_dp(static_cast<int>(row), w) > sens.dv_dp(static_cast<int>(row), best))
        best = w;
    part.assignment[sens.row_buses[row]] = best;
  }
  // each zone anchored at its own PCC regardless of argmax
  for (int w = 0; w < r; ++w) part.assignment[sens.col_buses[w]] = w;

  const RootedTree tree = root_at_slack(net);
  const int slack = net.slack_index();
  if (!tree.children[slack].empty())
    part.assignment[slack] = part.assignment[tree.children[slack][0]];

  part.assignment = repair_connectivity(part.assignment, net, sens.col_buses);
  part.overlaps = overlap_branches(part.assignment, net);
  return part;
}

/// Degenerate partition placing the whole network in one zone (no MGs).
inline ZonePartition single_zone_partition(const Network& net) {
  ZonePartition part;
  part.zone_count = 1;
  part.assignment.assign(net.buses.size(), 0);
  return part;
}

}  // namespace mgopt
