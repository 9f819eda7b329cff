#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "partod/adjustment.hpp"
#include "partod/assignment.hpp"
#include "partod/csv.hpp"
#include "partod/estimation.hpp"
#include "partod/experiment.hpp"
#include "partod/ingest.hpp"
#include "partod/io.hpp"
#include "partod/metrics.hpp"
#include "partod/synth.hpp"

namespace fs = std::filesystem;
using namespace partod;

namespace {

RoadNetwork load_network(const std::string& nodes, const std::string& edges,
                         const std::string& tntp) {
    if (!tntp.empty()) return io::read_tntp(tntp);
    require(!nodes.empty() && !edges.empty(), ErrorCode::Config,
            "need --nodes/--edges or --tntp");
    return io::read_network(nodes, edges);
}

Partitioning pick_partitioning(const RoadNetwork& network, double resolution,
                               int communities, std::uint64_t seed) {
    if (resolution >= 0.0) return louvain(network, resolution, seed);
    require(communities > 0, ErrorCode::Config,
            "need --resolution or --communities for a partition-based strategy");
    SweepResult sweep = resolution_sweep(network, seed);
    for (auto& p : sweep.entries)
        if (p.community_count == communities) return std::move(p);
    fail(ErrorCode::Config, "sweep found no partitioning with " +
                                std::to_string(communities) + " communities");
}

void write_community_files(const CommunityNetwork& community, const RoadNetwork& network,
                           const std::string& out_dir, int count) {
    const std::string suffix = std::to_string(count);
    io::write_network(community.net, out_dir + "/community_nodes_" + suffix + ".csv",
                      out_dir + "/community_edges_" + suffix + ".csv");
    csv::Writer members(out_dir + "/members_" + suffix + ".csv");
    members.row({"community_edge_id", "member_edge_id"});
    for (int ce = 0; ce < community.net.edge_count(); ++ce)
        for (int a : community.members[static_cast<std::size_t>(ce)])
            members.row({community.net.edge(ce).id, network.edge(a).id});
}

int run(int argc, char** argv) {
    CLI::App app{"partitioned O-D demand estimation and traffic assignment toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    std::uint64_t seed = 0;
    std::string out_dir = "out";
    std::string config_path;
    app.add_option("--seed", seed, "master random seed")->capture_default_str();
    app.add_option("--out", out_dir, "output directory")->capture_default_str();
    app.add_option("--config", config_path, "JSON config file (sweep subcommand)");

    // --- synth -----------------------------------------------------------
    auto* synth_cmd = app.add_subcommand("synth", "generate a theoretical network");
    int blocks = 1;
    synth_cmd->add_option("--blocks", blocks, "number of nine-node blocks")
        ->capture_default_str();

    // --- ingest ----------------------------------------------------------
    auto* ingest_cmd = app.add_subcommand("ingest", "process detector readings");
    std::string nodes_path, edges_path, tntp_path, readings_path;
    std::string start_date, end_date;
    int min_obs = 1000;
    ingest_cmd->add_option("--nodes", nodes_path, "nodes.csv");
    ingest_cmd->add_option("--edges", edges_path, "edges.csv");
    ingest_cmd->add_option("--readings", readings_path, "readings.csv")->required();
    ingest_cmd->add_option("--start-date", start_date, "inclusive ISO date filter");
    ingest_cmd->add_option("--end-date", end_date, "inclusive ISO date filter");
    ingest_cmd->add_option("--min-obs", min_obs, "minutes needed for the capacity rule")
        ->capture_default_str();
    std::vector<std::string> bin_labels;
    ingest_cmd->add_option("--bins", bin_labels, "subset of AM MD PM to produce");

    // --- partition -------------------------------------------------------
    auto* partition_cmd = app.add_subcommand("partition", "community detection sweep");
    double resolution = -1.0;
    std::string flows_path;
    partition_cmd->add_option("--nodes", nodes_path, "nodes.csv");
    partition_cmd->add_option("--edges", edges_path, "edges.csv");
    partition_cmd->add_option("--tntp", tntp_path, "TNTP network file");
    partition_cmd->add_option("--resolution", resolution,
                              "single resolution instead of a sweep");
    partition_cmd->add_option("--flows", flows_path,
                              "flow samples; enables community network output");

    // --- estimate --------------------------------------------------------
    auto* estimate_cmd = app.add_subcommand("estimate", "GLS O-D prior estimation");
    std::string strategy_str = "unpartitioned";
    int k_routes = 4;
    int communities = 0;
    estimate_cmd->add_option("--strategy", strategy_str,
                             "unpartitioned|degenerate|internal|external|combined")
        ->capture_default_str();
    estimate_cmd->add_option("--nodes", nodes_path, "nodes.csv");
    estimate_cmd->add_option("--edges", edges_path, "edges.csv");
    estimate_cmd->add_option("--tntp", tntp_path, "TNTP network file");
    estimate_cmd->add_option("--flows", flows_path, "fitting flow samples")->required();
    estimate_cmd->add_option("--k", k_routes, "routes per pair")->capture_default_str();
    estimate_cmd->add_option("--resolution", resolution, "fixed Louvain resolution");
    estimate_cmd->add_option("--communities", communities,
                             "pick the sweep entry with this community count");

    // --- adjust ----------------------------------------------------------
    auto* adjust_cmd = app.add_subcommand("adjust", "bilevel O-D adjustment");
    std::string od_path;
    double fw_gap = 1e-5;
    int adjust_iters = 50;
    bool free_flow = false;
    adjust_cmd->add_option("--nodes", nodes_path, "nodes.csv");
    adjust_cmd->add_option("--edges", edges_path, "edges.csv");
    adjust_cmd->add_option("--tntp", tntp_path, "TNTP network file");
    adjust_cmd->add_option("--od", od_path, "prior od.csv")->required();
    adjust_cmd->add_option("--flows", flows_path, "observed flow samples")->required();
    adjust_cmd->add_option("--fw-gap", fw_gap, "inner equilibrium gap")
        ->capture_default_str();
    adjust_cmd->add_option("--max-iter", adjust_iters, "outer iteration cap")
        ->capture_default_str();
    adjust_cmd->add_flag("--free-flow", free_flow, "flow-independent costs");

    // --- assign ----------------------------------------------------------
    auto* assign_cmd = app.add_subcommand("assign", "user-equilibrium assignment");
    assign_cmd->add_option("--nodes", nodes_path, "nodes.csv");
    assign_cmd->add_option("--edges", edges_path, "edges.csv");
    assign_cmd->add_option("--tntp", tntp_path, "TNTP network file");
    assign_cmd->add_option("--od", od_path, "od.csv demand")->required();
    assign_cmd->add_option("--gap", fw_gap, "relative gap threshold")
        ->capture_default_str();
    assign_cmd->add_flag("--free-flow", free_flow, "flow-independent costs");

    // --- validate --------------------------------------------------------
    auto* validate_cmd = app.add_subcommand("validate", "error metrics for a solution");
    std::string ue_path, speeds_path;
    validate_cmd->add_option("--nodes", nodes_path, "nodes.csv");
    validate_cmd->add_option("--edges", edges_path, "edges.csv");
    validate_cmd->add_option("--tntp", tntp_path, "TNTP network file");
    validate_cmd->add_option("--ue", ue_path, "ue_flows.csv")->required();
    validate_cmd->add_option("--flows", flows_path, "validation flow samples")
        ->required();
    validate_cmd->add_option("--speeds", speeds_path,
                             "observed speeds (day,edge_id,speed_kmh)");

    // --- sweep (full experiment) ------------------------------------------
    auto* sweep_cmd = app.add_subcommand("sweep", "end-to-end experiment sweep");
    int synth_blocks = 0;
    int min_communities = 0, max_communities = 0;
    std::vector<std::string> bins, fit_flows, validation_flows, validation_speeds;
    sweep_cmd->add_option("--strategy", strategy_str,
                          "unpartitioned|degenerate|internal|external|combined");
    sweep_cmd->add_option("--synth-blocks", synth_blocks, "generate a block network");
    sweep_cmd->add_option("--nodes", nodes_path, "nodes.csv");
    sweep_cmd->add_option("--edges", edges_path, "edges.csv");
    sweep_cmd->add_option("--tntp", tntp_path, "TNTP network file");
    sweep_cmd->add_option("--bins", bins, "time-bin labels");
    sweep_cmd->add_option("--fit-flows", fit_flows, "fitting flow files per bin");
    sweep_cmd->add_option("--validation-flows", validation_flows,
                          "validation flow files per bin");
    sweep_cmd->add_option("--validation-speeds", validation_speeds,
                          "observed speed files per bin");
    sweep_cmd->add_option("--resolution", resolution, "fixed resolution");
    sweep_cmd->add_option("--min-communities", min_communities,
                          "keep sweep entries with at least this many communities");
    sweep_cmd->add_option("--max-communities", max_communities,
                          "keep sweep entries with at most this many communities");
    sweep_cmd->add_option("--k", k_routes, "routes per pair");
    sweep_cmd->add_flag("--free-flow", free_flow, "flow-independent costs");

    CLI11_PARSE(app, argc, argv);
    fs::create_directories(out_dir);

    if (synth_cmd->parsed()) {
        SynthConfig config;
        config.blocks = blocks;
        config.seed = seed;
        SynthScenario scenario = generate_scenario(config);
        io::write_network(scenario.network, out_dir + "/nodes.csv",
                          out_dir + "/edges.csv");
        io::write_od(scenario.truth, scenario.network, out_dir + "/od_truth.csv");
        io::write_flows(scenario.fit, scenario.network, out_dir + "/flows_ALL.csv");
        io::write_flows(scenario.validation, scenario.network,
                        out_dir + "/flows_ALL_validation.csv");
        std::printf("synth: %d nodes, %d edges, %d fit days, %d validation days\n",
                    scenario.network.node_count(), scenario.network.edge_count(),
                    scenario.fit.sample_count(), scenario.validation.sample_count());
        return 0;
    }

    if (ingest_cmd->parsed()) {
        const RoadNetwork network = load_network(nodes_path, edges_path, tntp_path);
        IngestConfig config;
        config.start_date = start_date;
        config.end_date = end_date;
        config.min_capacity_observations = min_obs;
        if (!bin_labels.empty()) {
            std::vector<TimeBin> selected;
            for (const TimeBin& bin : standard_bins())
                for (const auto& label : bin_labels)
                    if (bin.label == label) selected.push_back(bin);
            require(selected.size() == bin_labels.size(), ErrorCode::Config,
                    "unknown bin label; choose from AM, MD, PM");
            config.bins = std::move(selected);
        }
        IngestResult result = run_ingest(network, readings_path, config);
        io::write_network(result.network, out_dir + "/nodes.csv",
                          out_dir + "/edges_estimated.csv");
        for (const FlowSampleSet& set : result.flows_per_bin)
            io::write_flows(set, result.network,
                            out_dir + "/flows_" + set.bin + ".csv");
        for (const auto& w : result.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
        return 0;
    }

    if (partition_cmd->parsed()) {
        const RoadNetwork network = load_network(nodes_path, edges_path, tntp_path);
        std::vector<Partitioning> entries;
        if (resolution >= 0.0) {
            entries.push_back(louvain(network, resolution, seed));
        } else {
            SweepResult sweep = resolution_sweep(network, seed);
            for (const auto& w : sweep.warnings)
                std::fprintf(stderr, "warning: %s\n", w.c_str());
            entries = std::move(sweep.entries);
        }
        for (const Partitioning& p : entries) {
            io::write_partition(p.community, network,
                                out_dir + "/partition_" +
                                    std::to_string(p.community_count) + ".csv");
            std::printf("resolution %g -> %d communities (Q=%g)\n", p.resolution,
                        p.community_count, p.modularity);
            if (!flows_path.empty() && p.community_count >= 2 &&
                p.community_count < network.node_count()) {
                const FlowSampleSet flows = io::read_flows(network, flows_path, "ALL");
                try {
                    const CommunityNetwork community =
                        build_community_network(network, p, flows);
                    write_community_files(community, network, out_dir,
                                          p.community_count);
                } catch (const Error& e) {
                    std::fprintf(stderr, "warning: %d communities: %s\n",
                                 p.community_count, e.what());
                }
            }
        }
        return 0;
    }

    if (estimate_cmd->parsed()) {
        const RoadNetwork network = load_network(nodes_path, edges_path, tntp_path);
        const FlowSampleSet flows = io::read_flows(network, flows_path, "ALL");
        GlsConfig gls;
        gls.k_routes = k_routes;
        const Strategy strategy = parse_strategy(strategy_str);

        if (strategy == Strategy::Unpartitioned) {
            const RouteSet routes =
                build_routeset(network, ODPairSet::all_pairs(network), k_routes);
            GlsResult result = gls_estimate(network, flows, routes, gls);
            std::vector<int> identity(static_cast<std::size_t>(network.node_count()));
            for (std::size_t i = 0; i < identity.size(); ++i)
                identity[i] = static_cast<int>(i);
            const ODMatrix od =
                scatter_demand(result.demand, identity, network.node_count());
            io::write_od(od, network, out_dir + "/od.csv");
            write_routes_csv(routes, network, out_dir + "/routes.csv");
            std::printf("objective %.6g after %zu iterations\n", result.objective,
                        result.objective_trace.size() - 1);
            return 0;
        }

        const Partitioning partitioning =
            pick_partitioning(network, resolution, communities, seed);
        io::write_partition(partitioning.community, network,
                            out_dir + "/partition_" +
                                std::to_string(partitioning.community_count) + ".csv");

        if (strategy == Strategy::Degenerate) {
            const CommunityNetwork community =
                build_community_network(network, partitioning, flows);
            const ODMatrix od = degenerate_prior(community, gls);
            io::write_od(od, community.net, out_dir + "/od_community.csv");
            write_community_files(community, network, out_dir,
                                  partitioning.community_count);
            return 0;
        }

        ODMatrix prior;
        std::vector<std::string> warnings;
        if (strategy == Strategy::Internal) {
            prior = internal_prior(network, partitioning, flows, gls, &warnings);
        } else {
            const CommunityNetwork community =
                build_community_network(network, partitioning, flows, &warnings);
            const ODMatrix community_od = degenerate_prior(community, gls);
            const ODMatrix external =
                external_prior(community_od, partitioning, network.node_count());
            if (strategy == Strategy::External) {
                prior = external;
            } else {
                prior = combined_prior(
                    internal_prior(network, partitioning, flows, gls, &warnings),
                    external);
            }
        }
        for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
        io::write_od(prior, network, out_dir + "/od.csv");
        return 0;
    }

    if (adjust_cmd->parsed()) {
        const RoadNetwork network = load_network(nodes_path, edges_path, tntp_path);
        const ODMatrix prior = io::read_od(network, od_path);
        const FlowSampleSet flows = io::read_flows(network, flows_path, "ALL");
        AdjustmentConfig config;
        config.max_iterations = adjust_iters;
        config.fw.gap_threshold = fw_gap;
        config.fw.free_flow_costs = free_flow;
        AdjustmentResult result = adjust(prior, flows.mean_flows(), network, config);
        io::write_od(result.adjusted, network, out_dir + "/od_adjusted.csv");
        write_adjust_trace_csv(result, out_dir + "/adjust_trace.csv");
        std::printf("converged=%s F=%.6g iterations=%zu (%s)\n",
                    result.converged ? "true" : "false", result.objective,
                    result.trace.size() - 1, result.diagnostic.c_str());
        return 0;
    }

    if (assign_cmd->parsed()) {
        const RoadNetwork network = load_network(nodes_path, edges_path, tntp_path);
        const ODMatrix demand = io::read_od(network, od_path);
        FrankWolfeConfig config;
        config.gap_threshold = fw_gap;
        config.free_flow_costs = free_flow;
        const EquilibriumSolution solution = frank_wolfe(network, demand, config);
        write_ue_csv(solution, network, out_dir + "/ue_flows.csv");
        write_fw_trace_csv(solution, out_dir + "/fw_trace.csv");
        std::printf("converged=%s gap=%.3g iterations=%d\n",
                    solution.converged ? "true" : "false", solution.relative_gap,
                    solution.iterations);
        return 0;
    }

    if (validate_cmd->parsed()) {
        const RoadNetwork network = load_network(nodes_path, edges_path, tntp_path);
        const FlowSampleSet flows = io::read_flows(network, flows_path, "ALL");
        csv::Table ue = csv::read_file(ue_path);
        const int c_edge = ue.require_column("edge_id");
        const int c_flow = ue.require_column("flow_vph");
        std::vector<double> predicted(static_cast<std::size_t>(network.edge_count()),
                                      0.0);
        for (const auto& row : ue.rows) {
            const int a = network.edge_index(row.at(static_cast<std::size_t>(c_edge)));
            require(a >= 0, ErrorCode::Io, "unknown edge id in '" + ue_path + "'");
            predicted[static_cast<std::size_t>(a)] =
                csv::parse_double(row.at(static_cast<std::size_t>(c_flow)), ue_path);
        }
        const RaeResult flow_rae = rae_flow(predicted, flows.mean_flows(), network);
        {
            csv::Writer w(out_dir + "/rae_flow.csv");
            w.row({"edge_id", "rae"});
            for (std::size_t i = 0; i < flow_rae.values.size(); ++i)
                w.row({network.edge(flow_rae.edge_indices[i]).id,
                       csv::format_double(flow_rae.values[i])});
        }
        const Quartiles q = quartiles(flow_rae.values);
        std::printf("flow RAE median=%.4g iqr=[%.4g, %.4g] over %zu edges\n", q.median,
                    q.q1, q.q3, flow_rae.values.size());
        if (!speeds_path.empty()) {
            csv::Table st = csv::read_file(speeds_path);
            const int sc_edge = st.require_column("edge_id");
            const int sc_speed = st.require_column("speed_kmh");
            std::vector<double> sum(static_cast<std::size_t>(network.edge_count()), 0.0);
            std::vector<int> count(static_cast<std::size_t>(network.edge_count()), 0);
            for (const auto& row : st.rows) {
                const int a =
                    network.edge_index(row.at(static_cast<std::size_t>(sc_edge)));
                require(a >= 0, ErrorCode::Io, "unknown edge id in speeds file");
                sum[static_cast<std::size_t>(a)] += csv::parse_double(
                    row.at(static_cast<std::size_t>(sc_speed)), speeds_path);
                count[static_cast<std::size_t>(a)] += 1;
            }
            for (std::size_t a = 0; a < sum.size(); ++a)
                if (count[a] > 0) sum[a] /= count[a];
            const RaeResult time_rae = rae_time(predicted, network, sum);
            csv::Writer w(out_dir + "/rae_time.csv");
            w.row({"edge_id", "rae"});
            for (std::size_t i = 0; i < time_rae.values.size(); ++i)
                w.row({network.edge(time_rae.edge_indices[i]).id,
                       csv::format_double(time_rae.values[i])});
            const Quartiles tq = quartiles(time_rae.values);
            std::printf("time RAE median=%.4g iqr=[%.4g, %.4g] over %zu edges\n",
                        tq.median, tq.q1, tq.q3, time_rae.values.size());
        }
        return 0;
    }

    if (sweep_cmd->parsed()) {
        ExperimentConfig config;
        if (!config_path.empty()) config = load_config(config_path);
        if (sweep_cmd->count("--strategy")) config.strategy = parse_strategy(strategy_str);
        if (synth_blocks > 0) config.synth_blocks = synth_blocks;
        if (!nodes_path.empty()) config.nodes_path = nodes_path;
        if (!edges_path.empty()) config.edges_path = edges_path;
        if (!tntp_path.empty()) config.tntp_path = tntp_path;
        if (!bins.empty()) config.bins = bins;
        if (!fit_flows.empty()) config.fit_flow_paths = fit_flows;
        if (!validation_flows.empty()) config.validation_flow_paths = validation_flows;
        if (!validation_speeds.empty())
            config.validation_speed_paths = validation_speeds;
        if (sweep_cmd->count("--resolution")) config.fixed_resolution = resolution;
        if (min_communities > 0) config.min_communities = min_communities;
        if (max_communities > 0) config.max_communities = max_communities;
        if (sweep_cmd->count("--k")) config.k_routes = k_routes;
        if (free_flow) config.fw.free_flow_costs = true;
        if (app.count("--seed")) config.seed = seed;
        config.out_dir = out_dir;

        const ExperimentReport report = run_experiment(config);
        for (const auto& w : report.warnings)
            std::fprintf(stderr, "warning: %s\n", w.c_str());
        for (const SizeEntry& e : report.entries) {
            if (e.valid && e.rae_available)
                std::printf("%s %s C=%d flow RAE median=%.4g wall=%.2fs\n",
                            e.strategy.c_str(), e.bin.c_str(), e.community_count,
                            e.median_flow_rae, e.wall_seconds);
            else
                std::printf("%s %s C=%d %s (wall=%.2fs)\n", e.strategy.c_str(),
                            e.bin.c_str(), e.community_count,
                            e.valid ? "adjustment did not converge" : e.note.c_str(),
                            e.wall_seconds);
        }
        return 0;
    }

    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
