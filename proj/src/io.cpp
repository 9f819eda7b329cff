#include "partod/io.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "partod/csv.hpp"

namespace partod::io {

using csv::format_double;

RoadNetwork read_network(const std::string& nodes_path, const std::string& edges_path) {
    csv::Table nt = csv::read_file(nodes_path);
    const int n_id = nt.require_column("id");
    const int n_label = nt.column("label");
    const int n_lat = nt.column("lat");
    const int n_lon = nt.column("lon");

    std::vector<SuperNode> nodes;
    nodes.reserve(nt.rows.size());
    for (const auto& row : nt.rows) {
        SuperNode node;
        node.id = row.at(static_cast<std::size_t>(n_id));
        if (n_label >= 0) node.label = row.at(static_cast<std::size_t>(n_label));
        if (n_lat >= 0 && !row.at(static_cast<std::size_t>(n_lat)).empty())
            node.lat = csv::parse_double(row[static_cast<std::size_t>(n_lat)], nodes_path);
        if (n_lon >= 0 && !row.at(static_cast<std::size_t>(n_lon)).empty())
            node.lon = csv::parse_double(row[static_cast<std::size_t>(n_lon)], nodes_path);
        nodes.push_back(std::move(node));
    }

    std::unordered_map<std::string, int> node_index;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        node_index.emplace(nodes[i].id, static_cast<int>(i));

    csv::Table et = csv::read_file(edges_path);
    const int e_id = et.require_column("id");
    const int e_tail = et.require_column("tail");
    const int e_head = et.require_column("head");
    const int e_len = et.require_column("length_km");
    const int e_cap = et.require_column("capacity_vph");
    const int e_t0 = et.require_column("t0_hours");
    const int e_alpha = et.column("alpha");
    const int e_beta = et.column("beta");

    std::vector<SuperEdge> edges;
    edges.reserve(et.rows.size());
    for (const auto& row : et.rows) {
        SuperEdge e;
        e.id = row.at(static_cast<std::size_t>(e_id));
        auto tail_it = node_index.find(row.at(static_cast<std::size_t>(e_tail)));
        auto head_it = node_index.find(row.at(static_cast<std::size_t>(e_head)));
        require(tail_it != node_index.end() && head_it != node_index.end(),
                ErrorCode::Io, "edge '" + e.id + "' references unknown node id");
        e.tail = tail_it->second;
        e.head = head_it->second;
        e.length_km = csv::parse_double(row.at(static_cast<std::size_t>(e_len)), edges_path);
        e.capacity_vph = csv::parse_double(row.at(static_cast<std::size_t>(e_cap)), edges_path);
        e.t0_hours = csv::parse_double(row.at(static_cast<std::size_t>(e_t0)), edges_path);
        if (e_alpha >= 0 && !row.at(static_cast<std::size_t>(e_alpha)).empty())
            e.alpha = csv::parse_double(row[static_cast<std::size_t>(e_alpha)], edges_path);
        if (e_beta >= 0 && !row.at(static_cast<std::size_t>(e_beta)).empty())
            e.beta = csv::parse_double(row[static_cast<std::size_t>(e_beta)], edges_path);
        edges.push_back(std::move(e));
    }
    return RoadNetwork(std::move(nodes), std::move(edges));
}

void write_network(const RoadNetwork& network, const std::string& nodes_path,
                   const std::string& edges_path) {
    csv::Writer nw(nodes_path);
    nw.row({"id", "label", "lat", "lon"});
    for (const auto& node : network.nodes()) {
        nw.row({node.id, node.label,
                std::isnan(node.lat) ? "" : format_double(node.lat),
                std::isnan(node.lon) ? "" : format_double(node.lon)});
    }
    csv::Writer ew(edges_path);
    ew.row({"id", "tail", "head", "length_km", "capacity_vph", "t0_hours", "alpha", "beta"});
    for (const auto& e : network.edges()) {
        ew.row({e.id, network.node(e.tail).id, network.node(e.head).id,
                format_double(e.length_km), format_double(e.capacity_vph),
                format_double(e.t0_hours), format_double(e.alpha), format_double(e.beta)});
    }
}

RoadNetwork read_tntp(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot open '" + path + "'");

    std::string line;
    bool in_metadata = true;
    std::vector<SuperEdge> edges;
    int max_node = 0;
    int edge_counter = 0;

    while (std::getline(in, line)) {
        std::string t = csv::trim(line);
        if (t.empty() || t[0] == '~') continue;
        if (in_metadata) {
            if (t.find("<END OF METADATA>") != std::string::npos) in_metadata = false;
            if (t.find('<') != std::string::npos) continue;
            in_metadata = false;  // data began without the end marker
        }
        // Row: init term capacity length fft b power speed toll type ;
        std::replace(t.begin(), t.end(), ';', ' ');
        std::istringstream ss(t);
        long init = 0, term = 0;
        double capacity = 0, length = 0, fft = 0, b = 0.15, power = 4.0;
        if (!(ss >> init >> term >> capacity >> length >> fft)) continue;
        ss >> b >> power;  // optional trailing fields
        SuperEdge e;
        e.id = "e" + std::to_string(++edge_counter);
        e.tail = static_cast<int>(init) - 1;
        e.head = static_cast<int>(term) - 1;
        e.length_km = length;
        e.capacity_vph = capacity;
        e.t0_hours = fft > 0.0 ? fft : length;
        e.alpha = b;
        e.beta = power;
        max_node = std::max(max_node, static_cast<int>(std::max(init, term)));
        edges.push_back(std::move(e));
    }
    require(!edges.empty(), ErrorCode::Io, "no links parsed from '" + path + "'");

    std::vector<SuperNode> nodes;
    nodes.reserve(static_cast<std::size_t>(max_node));
    for (int i = 1; i <= max_node; ++i)
        nodes.push_back({std::to_string(i), std::to_string(i)});
    return RoadNetwork(std::move(nodes), std::move(edges));
}

FlowSampleSet read_flows(const RoadNetwork& network, const std::string& path,
                         const std::string& bin) {
    csv::Table t = csv::read_file(path);
    const int c_day = t.require_column("day");
    const int c_edge = t.require_column("edge_id");
    const int c_flow = t.require_column("flow_vph");

    std::vector<std::string> day_order;
    std::map<std::string, std::vector<double>> by_day;
    std::map<std::string, int> seen_count;
    for (const auto& row : t.rows) {
        const std::string& day = row.at(static_cast<std::size_t>(c_day));
        int a = network.edge_index(row.at(static_cast<std::size_t>(c_edge)));
        require(a >= 0, ErrorCode::Io, "unknown edge id in '" + path + "'");
        auto it = by_day.find(day);
        if (it == by_day.end()) {
            day_order.push_back(day);
            it = by_day.emplace(day, std::vector<double>(
                                         static_cast<std::size_t>(network.edge_count()),
                                         -1.0)).first;
        }
        it->second[static_cast<std::size_t>(a)] =
            csv::parse_double(row.at(static_cast<std::size_t>(c_flow)), path);
        seen_count[day]++;
    }

    FlowSampleSet set;
    set.bin = bin;
    int j = 0;
    for (const auto& day : day_order) {
        FlowSnapshot snap;
        snap.sample_index = j++;
        snap.day = day;
        snap.bin = bin;
        snap.flows = by_day.at(day);
        for (double v : snap.flows)
            require(v >= 0.0, ErrorCode::Io,
                    "day '" + day + "' in '" + path + "' does not cover every edge");
        check_snapshot(network, snap);
        set.samples.push_back(std::move(snap));
    }
    return set;
}

void write_flows(const FlowSampleSet& set, const RoadNetwork& network,
                 const std::string& path) {
    csv::Writer w(path);
    w.row({"day", "edge_id", "flow_vph"});
    for (const auto& snap : set.samples)
        for (int a = 0; a < network.edge_count(); ++a)
            w.row({snap.day, network.edge(a).id,
                   format_double(snap.flows[static_cast<std::size_t>(a)])});
}

ODMatrix read_od(const RoadNetwork& network, const std::string& path) {
    csv::Table t = csv::read_file(path);
    const int c_o = t.require_column("origin_id");
    const int c_d = t.require_column("destination_id");
    const int c_g = t.require_column("demand_vph");

    ODMatrix od = ODMatrix::zeros(ODPairSet::all_pairs(network));
    for (const auto& row : t.rows) {
        int o = network.node_index(row.at(static_cast<std::size_t>(c_o)));
        int d = network.node_index(row.at(static_cast<std::size_t>(c_d)));
        require(o >= 0 && d >= 0, ErrorCode::Io, "unknown node id in '" + path + "'");
        int idx = ODPairSet::row_major_index(network.node_count(), o, d);
        od.demand[static_cast<std::size_t>(idx)] =
            csv::parse_double(row.at(static_cast<std::size_t>(c_g)), path);
    }
    od.check();
    return od;
}

void write_od(const ODMatrix& od, const RoadNetwork& network, const std::string& path) {
    csv::Writer w(path);
    w.row({"origin_id", "destination_id", "demand_vph"});
    for (std::size_t i = 0; i < od.pairs.pairs.size(); ++i) {
        if (od.demand[i] == 0.0) continue;
        const auto& [o, d] = od.pairs.pairs[i];
        w.row({network.node(o).id, network.node(d).id, format_double(od.demand[i])});
    }
}

void write_partition(const std::vector<int>& community, const RoadNetwork& network,
                     const std::string& path) {
    require(static_cast<int>(community.size()) == network.node_count(),
            ErrorCode::InvalidInput, "partition size mismatch");
    csv::Writer w(path);
    w.row({"node_id", "community_id"});
    for (int v = 0; v < network.node_count(); ++v)
        w.row({network.node(v).id, std::to_string(community[static_cast<std::size_t>(v)])});
}

std::vector<int> read_partition(const RoadNetwork& network, const std::string& path) {
    csv::Table t = csv::read_file(path);
    const int c_node = t.require_column("node_id");
    const int c_com = t.require_column("community_id");
    std::vector<int> community(static_cast<std::size_t>(network.node_count()), -1);
    for (const auto& row : t.rows) {
        int v = network.node_index(row.at(static_cast<std::size_t>(c_node)));
        require(v >= 0, ErrorCode::Io, "unknown node id in '" + path + "'");
        community[static_cast<std::size_t>(v)] =
            static_cast<int>(csv::parse_long(row.at(static_cast<std::size_t>(c_com)), path));
    }
    for (int c : community)
        require(c >= 0, ErrorCode::Io, "partition file does not cover every node");
    return community;
}

} // namespace partod::io
