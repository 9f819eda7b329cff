#pragma once

#include <string>

#include "partod/demand.hpp"
#include "partod/network.hpp"

namespace partod::io {

/// Reads `nodes.csv` (id,label,lat,lon) and `edges.csv`
/// (id,tail,head,length_km,capacity_vph,t0_hours,alpha,beta).
/// Empty alpha/beta cells take the 0.15 / 4 defaults.
RoadNetwork read_network(const std::string& nodes_path, const std::string& edges_path);

void write_network(const RoadNetwork& network, const std::string& nodes_path,
                   const std::string& edges_path);

/// Reads a TNTP *_net.tntp file. Fields map onto SuperEdge as-is:
/// length -> length_km, free_flow_time -> t0_hours, capacity -> capacity_vph,
/// b -> alpha, power -> beta. A zero free-flow time falls back to the length.
RoadNetwork read_tntp(const std::string& path);

/// flows_<bin>.csv: day,edge_id,flow_vph. Every day must cover every edge.
FlowSampleSet read_flows(const RoadNetwork& network, const std::string& path,
                         const std::string& bin);

void write_flows(const FlowSampleSet& set, const RoadNetwork& network,
                 const std::string& path);

/// od.csv: origin_id,destination_id,demand_vph; zero rows omitted on write.
/// Reading returns a matrix over the full all-pairs universe.
ODMatrix read_od(const RoadNetwork& network, const std::string& path);

void write_od(const ODMatrix& od, const RoadNetwork& network, const std::string& path);

void write_partition(const std::vector<int>& community, const RoadNetwork& network,
                     const std::string& path);

std::vector<int> read_partition(const RoadNetwork& network, const std::string& path);

} // namespace partod::io
