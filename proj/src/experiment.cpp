#include "partod/experiment.hpp"

#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>

#include <json.hpp>

#include "partod/csv.hpp"
#include "partod/io.hpp"
#include "partod/metrics.hpp"

namespace partod {

namespace fs = std::filesystem;
using nlohmann::json;

Strategy parse_strategy(const std::string& name) {
    if (name == "unpartitioned") return Strategy::Unpartitioned;
    if (name == "degenerate") return Strategy::Degenerate;
    if (name == "internal") return Strategy::Internal;
    if (name == "external") return Strategy::External;
    if (name == "combined") return Strategy::Combined;
    fail(ErrorCode::Config, "unknown strategy '" + name + "'");
}

std::string strategy_name(Strategy strategy) {
    switch (strategy) {
        case Strategy::Unpartitioned: return "unpartitioned";
        case Strategy::Degenerate: return "degenerate";
        case Strategy::Internal: return "internal";
        case Strategy::External: return "external";
        case Strategy::Combined: return "combined";
    }
    return "unknown";
}

long current_peak_rss_bytes() {
    std::ifstream status("/proc/self/status");
    std::string line;
    while (std::getline(status, line)) {
        if (line.rfind("VmHWM:", 0) == 0) {
            long kb = 0;
            if (std::sscanf(line.c_str(), "VmHWM: %ld", &kb) == 1) return kb * 1024;
        }
    }
    rusage usage{};
    getrusage(RUSAGE_SELF, &usage);
    return usage.ru_maxrss * 1024;
}

namespace {

struct BinData {
    std::string bin;
    FlowSampleSet fit;
    FlowSampleSet validation;
    std::vector<double> validation_speeds;  // empty when unavailable
};

struct Inputs {
    RoadNetwork network;
    std::vector<BinData> bins;
};

std::vector<double> mean_speeds(const RoadNetwork& network, const std::string& path) {
    csv::Table t = csv::read_file(path);
    const int c_edge = t.require_column("edge_id");
    const int c_speed = t.require_column("speed_kmh");
    std::vector<double> sum(static_cast<std::size_t>(network.edge_count()), 0.0);
    std::vector<int> count(static_cast<std::size_t>(network.edge_count()), 0);
    for (const auto& row : t.rows) {
        const int a = network.edge_index(row.at(static_cast<std::size_t>(c_edge)));
        require(a >= 0, ErrorCode::Io, "unknown edge id in '" + path + "'");
        const std::string& cell = row.at(static_cast<std::size_t>(c_speed));
        if (cell.empty()) continue;
        sum[static_cast<std::size_t>(a)] += csv::parse_double(cell, path);
        count[static_cast<std::size_t>(a)] += 1;
    }
    std::vector<double> mean(sum.size(), 0.0);
    for (std::size_t a = 0; a < sum.size(); ++a)
        if (count[a] > 0) mean[a] = sum[a] / count[a];
    return mean;
}

Inputs load_inputs(const ExperimentConfig& config) {
    Inputs inputs;
    if (config.synth_blocks > 0) {
        SynthConfig synth = config.synth;
        synth.blocks = config.synth_blocks;
        synth.seed = config.seed;
        SynthScenario scenario = generate_scenario(synth);
        inputs.network = std::move(scenario.network);
        BinData bin;
        bin.bin = scenario.fit.bin;
        bin.fit = std::move(scenario.fit);
        bin.validation = std::move(scenario.validation);
        inputs.bins.push_back(std::move(bin));
        return inputs;
    }

    if (!config.tntp_path.empty()) {
        inputs.network = io::read_tntp(config.tntp_path);
    } else if (!config.nodes_path.empty() && !config.edges_path.empty()) {
        inputs.network = io::read_network(config.nodes_path, config.edges_path);
    } else {
        fail(ErrorCode::Config, "no network source configured");
    }

    require(!config.bins.empty(), ErrorCode::Config, "no time bins configured");
    require(config.fit_flow_paths.size() == config.bins.size() &&
                config.validation_flow_paths.size() == config.bins.size(),
            ErrorCode::Config, "flow paths must match the bin list");
    for (std::size_t i = 0; i < config.bins.size(); ++i) {
        BinData bin;
        bin.bin = config.bins[i];
        bin.fit = io::read_flows(inputs.network, config.fit_flow_paths[i], bin.bin);
        bin.validation =
            io::read_flows(inputs.network, config.validation_flow_paths[i], bin.bin);
        if (config.validation_speed_paths.size() == config.bins.size() &&
            !config.validation_speed_paths[i].empty())
            bin.validation_speeds =
                mean_speeds(inputs.network, config.validation_speed_paths[i]);
        inputs.bins.push_back(std::move(bin));
    }
    return inputs;
}

struct StageResult {
    std::vector<double> predicted_flows;
    const RoadNetwork* evaluation_network = nullptr;
    std::vector<double> observed_validation;
    bool adjust_converged = false;
    bool fw_converged = false;
    bool community_level = false;
};

/// Prior construction, adjustment and assignment for one (bin, partitioning).
StageResult run_stage(const ExperimentConfig& config, const RoadNetwork& network,
                      const BinData& bin, const Partitioning* partitioning,
                      std::vector<std::string>* warnings,
                      // Owned storage for the community network, which must
                      // outlive the returned pointers.
                      std::unique_ptr<CommunityNetwork>& community_storage) {
    GlsConfig gls = config.gls;
    gls.k_routes = config.k_routes;

    AdjustmentConfig adjust_config = config.adjust_config;
    adjust_config.fw.free_flow_costs = config.fw.free_flow_costs;

    StageResult stage;

    if (config.strategy == Strategy::Degenerate) {
        require(partitioning != nullptr, ErrorCode::Config,
                "degenerate strategy needs a partitioning");
        community_storage = std::make_unique<CommunityNetwork>(
            build_community_network(network, *partitioning, bin.fit, warnings));
        const CommunityNetwork& community = *community_storage;
        const ODMatrix prior = degenerate_prior(community, gls);
        const std::vector<double> observed_fit = community.samples.mean_flows();
        const AdjustmentResult adjusted =
            adjust(prior, observed_fit, community.net, adjust_config);
        const EquilibriumSolution ue =
            frank_wolfe(community.net, adjusted.adjusted, config.fw);
        stage.predicted_flows = ue.flows;
        stage.evaluation_network = &community.net;
        stage.observed_validation =
            aggregate_sample_set(community, bin.validation).mean_flows();
        stage.adjust_converged = adjusted.converged;
        stage.fw_converged = ue.converged;
        stage.community_level = true;
        return stage;
    }

    ODMatrix prior;
    switch (config.strategy) {
        case Strategy::Unpartitioned: {
            const RouteSet routes =
                build_routeset(network, ODPairSet::all_pairs(network), gls.k_routes);
            GlsResult result = gls_estimate(network, bin.fit, routes, gls);
            std::vector<int> identity(static_cast<std::size_t>(network.node_count()));
            for (std::size_t i = 0; i < identity.size(); ++i)
                identity[i] = static_cast<int>(i);
            prior = scatter_demand(result.demand, identity, network.node_count());
            break;
        }
        case Strategy::Internal: {
            require(partitioning != nullptr, ErrorCode::Config,
                    "internal strategy needs a partitioning");
            prior = internal_prior(network, *partitioning, bin.fit, gls, warnings);
            break;
        }
        case Strategy::External:
        case Strategy::Combined: {
            require(partitioning != nullptr, ErrorCode::Config,
                    "strategy needs a partitioning");
            community_storage = std::make_unique<CommunityNetwork>(
                build_community_network(network, *partitioning, bin.fit, warnings));
            const ODMatrix community_od = degenerate_prior(*community_storage, gls);
            const ODMatrix external =
                external_prior(community_od, *partitioning, network.node_count());
            if (config.strategy == Strategy::External) {
                prior = external;
            } else {
                const ODMatrix internal =
                    internal_prior(network, *partitioning, bin.fit, gls, warnings);
                prior = combined_prior(internal, external);
            }
            break;
        }
        default:
            fail(ErrorCode::Config, "unhandled strategy");
    }

    const std::vector<double> observed_fit = bin.fit.mean_flows();
    const AdjustmentResult adjusted = adjust(prior, observed_fit, network, adjust_config);
    const EquilibriumSolution ue = frank_wolfe(network, adjusted.adjusted, config.fw);
    stage.predicted_flows = ue.flows;
    stage.evaluation_network = &network;
    stage.observed_validation = bin.validation.mean_flows();
    stage.adjust_converged = adjusted.converged;
    stage.fw_converged = ue.converged;
    return stage;
}

} // namespace

ExperimentReport run_experiment(const ExperimentConfig& original_config) {
    const auto t_start = std::chrono::steady_clock::now();
    ExperimentConfig config = original_config;
    // Synthetic scenarios are uncongested by construction.
    if (config.synth_blocks > 0) config.fw.free_flow_costs = true;

    ExperimentReport report;
    Inputs inputs = load_inputs(config);

    const ValidationReport network_check = validate(inputs.network);
    if (!network_check.ok) {
        std::string message = "network validation failed:";
        for (const auto& f : network_check.failures) message += " " + f;
        fail(ErrorCode::Config, message);
    }

    // Partition sizes to attempt; unpartitioned is a single pseudo-size.
    std::vector<Partitioning> partitionings;
    if (config.strategy != Strategy::Unpartitioned) {
        if (config.fixed_resolution >= 0.0) {
            partitionings.push_back(
                louvain(inputs.network, config.fixed_resolution, config.seed));
        } else {
            SweepResult sweep = resolution_sweep(inputs.network, config.seed);
            for (auto& w : sweep.warnings) report.warnings.push_back(std::move(w));
            partitionings = std::move(sweep.entries);
        }
        if (config.min_communities > 0 && config.max_communities > 0) {
            std::erase_if(partitionings, [&](const Partitioning& p) {
                return p.community_count < config.min_communities ||
                       p.community_count > config.max_communities;
            });
            require(!partitionings.empty(), ErrorCode::Config,
                    "no sweep entry within the requested community range");
        }
    }

    const int attempts = config.strategy == Strategy::Unpartitioned
                             ? 1
                             : static_cast<int>(partitionings.size());

    for (const BinData& bin : inputs.bins) {
        for (int p = 0; p < attempts; ++p) {
            const Partitioning* partitioning =
                config.strategy == Strategy::Unpartitioned ? nullptr : &partitionings[p];

            SizeEntry entry;
            entry.strategy = strategy_name(config.strategy);
            entry.bin = bin.bin;
            entry.community_count = partitioning ? partitioning->community_count
                                                 : inputs.network.node_count();
            entry.pct_supernodes = 100.0 / entry.community_count;
            entry.resolution = partitioning ? partitioning->resolution : 0.0;

            const long rss_before = current_peak_rss_bytes();
            const auto t0 = std::chrono::steady_clock::now();
            try {
                std::unique_ptr<CommunityNetwork> community;
                StageResult stage = run_stage(config, inputs.network, bin, partitioning,
                                              &report.warnings, community);
                entry.valid = true;
                entry.adjust_converged = stage.adjust_converged;
                entry.fw_converged = stage.fw_converged;
                // Non-converged adjustment is a missing data point.
                entry.rae_available = stage.adjust_converged;
                if (entry.rae_available) {
                    const RaeResult flow_rae =
                        rae_flow(stage.predicted_flows, stage.observed_validation,
                                 *stage.evaluation_network);
                    const Quartiles flow_q = quartiles(flow_rae.values);
                    entry.median_flow_rae = flow_q.median;
                    entry.flow_rae_q1 = flow_q.q1;
                    entry.flow_rae_q3 = flow_q.q3;
                    if (!bin.validation_speeds.empty() && !stage.community_level) {
                        const RaeResult time_rae =
                            rae_time(stage.predicted_flows, *stage.evaluation_network,
                                     bin.validation_speeds);
                        const Quartiles time_q = quartiles(time_rae.values);
                        entry.has_time_rae = true;
                        entry.median_time_rae = time_q.median;
                        entry.time_rae_q1 = time_q.q1;
                        entry.time_rae_q3 = time_q.q3;
                    }
                }
            } catch (const Error& e) {
                entry.valid = false;
                entry.note = e.what();
            }
            const auto t1 = std::chrono::steady_clock::now();
            entry.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
            entry.peak_rss_bytes = current_peak_rss_bytes();
            entry.rss_delta_bytes = std::max(entry.peak_rss_bytes - rss_before, 0L);
            report.entries.push_back(std::move(entry));
        }
    }

    report.total_wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    report.peak_rss_bytes = current_peak_rss_bytes();

    if (!config.out_dir.empty()) write_report(report, config, config.out_dir);
    return report;
}

namespace {

std::string fmt(double v) { return csv::format_double(v); }

/// Minimal line chart: one solid median polyline per bin plus dashed
/// quartile lines.
void write_chart(const std::string& path, const std::string& title,
                 const std::vector<SizeEntry>& entries,
                 double (*median_of)(const SizeEntry&),
                 double (*q1_of)(const SizeEntry&), double (*q3_of)(const SizeEntry&),
                 bool only_with_rae) {
    struct Point {
        double x, median, q1, q3;
    };
    std::map<std::string, std::vector<Point>> by_bin;
    for (const SizeEntry& e : entries) {
        if (!e.valid || (only_with_rae && !e.rae_available)) continue;
        by_bin[e.bin].push_back({e.pct_supernodes, median_of(e), q1_of(e), q3_of(e)});
    }
    if (by_bin.empty()) return;

    double x_max = 0.0, y_max = 0.0;
    for (auto& [bin, points] : by_bin) {
        std::sort(points.begin(), points.end(),
                  [](const Point& a, const Point& b) { return a.x < b.x; });
        for (const Point& p : points) {
            x_max = std::max(x_max, p.x);
            y_max = std::max({y_max, p.q3, p.median});
        }
    }
    if (y_max <= 0.0) y_max = 1.0;
    x_max = std::max(x_max, 1e-9);

    const double w = 640, h = 420, ml = 70, mr = 20, mt = 40, mb = 50;
    auto px = [&](double x) { return ml + (w - ml - mr) * x / x_max; };
    auto py = [&](double y) { return h - mb - (h - mt - mb) * y / y_max; };

    std::ofstream out(path);
    if (!out) fail(ErrorCode::Io, "cannot write '" + path + "'");
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h
        << "'>\n<rect width='100%' height='100%' fill='white'/>\n"
        << "<text x='" << w / 2 << "' y='20' text-anchor='middle' font-size='15'>"
        << title << "</text>\n"
        << "<line x1='" << ml << "' y1='" << h - mb << "' x2='" << w - mr << "' y2='"
        << h - mb << "' stroke='black'/>\n"
        << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << h - mb
        << "' stroke='black'/>\n"
        << "<text x='" << w / 2 << "' y='" << h - 12
        << "' text-anchor='middle' font-size='12'>% of supernodes per partition"
        << "</text>\n";
    for (int i = 0; i <= 4; ++i) {
        const double yv = y_max * i / 4.0;
        out << "<text x='" << ml - 8 << "' y='" << py(yv) + 4
            << "' text-anchor='end' font-size='10'>" << fmt(yv) << "</text>\n";
        const double xv = x_max * i / 4.0;
        out << "<text x='" << px(xv) << "' y='" << h - mb + 16
            << "' text-anchor='middle' font-size='10'>" << fmt(xv) << "</text>\n";
    }

    const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
    int color_index = 0;
    for (const auto& [bin, points] : by_bin) {
        const char* color = colors[color_index++ % 4];
        auto polyline = [&](double Point::*field, const char* dash) {
            out << "<polyline fill='none' stroke='" << color << "'" << dash
                << " points='";
            for (const Point& p : points) out << px(p.x) << ',' << py(p.*field) << ' ';
            out << "'/>\n";
        };
        polyline(&Point::median, "");
        polyline(&Point::q1, " stroke-dasharray='5,4'");
        polyline(&Point::q3, " stroke-dasharray='5,4'");
        for (const Point& p : points)
            out << "<circle cx='" << px(p.x) << "' cy='" << py(p.median)
                << "' r='3' fill='" << color << "'/>\n";
        out << "<text x='" << w - mr - 4 << "' y='" << mt + 14 * color_index
            << "' text-anchor='end' font-size='11' fill='" << color << "'>" << bin
            << "</text>\n";
    }
    out << "</svg>\n";
}

} // namespace

void write_report(const ExperimentReport& report, const ExperimentConfig& config,
                  const std::string& out_dir) {
    fs::create_directories(out_dir);

    {
        csv::Writer w(out_dir + "/report.csv");
        w.row({"strategy", "bin", "community_count", "pct_supernodes", "resolution",
               "valid", "adjust_converged", "fw_converged", "median_flow_rae",
               "flow_rae_q1", "flow_rae_q3", "median_time_rae", "time_rae_q1",
               "time_rae_q3", "wall_seconds", "peak_rss_bytes", "rss_delta_bytes",
               "note"});
        for (const SizeEntry& e : report.entries) {
            w.row({e.strategy, e.bin, std::to_string(e.community_count),
                   fmt(e.pct_supernodes), fmt(e.resolution), e.valid ? "1" : "0",
                   e.adjust_converged ? "1" : "0", e.fw_converged ? "1" : "0",
                   e.rae_available ? fmt(e.median_flow_rae) : "",
                   e.rae_available ? fmt(e.flow_rae_q1) : "",
                   e.rae_available ? fmt(e.flow_rae_q3) : "",
                   e.has_time_rae ? fmt(e.median_time_rae) : "",
                   e.has_time_rae ? fmt(e.time_rae_q1) : "",
                   e.has_time_rae ? fmt(e.time_rae_q3) : "", fmt(e.wall_seconds),
                   std::to_string(e.peak_rss_bytes), std::to_string(e.rss_delta_bytes),
                   e.note});
        }
    }

    json summary;
    summary["strategy"] = strategy_name(config.strategy);
    summary["seed"] = config.seed;
    summary["k_routes"] = config.k_routes;
    summary["total_wall_seconds"] = report.total_wall_seconds;
    summary["peak_rss_bytes"] = report.peak_rss_bytes;
    summary["warnings"] = report.warnings;
    summary["entries"] = json::array();
    for (const SizeEntry& e : report.entries) {
        json je;
        je["strategy"] = e.strategy;
        je["bin"] = e.bin;
        je["community_count"] = e.community_count;
        je["pct_supernodes"] = e.pct_supernodes;
        je["resolution"] = e.resolution;
        je["valid"] = e.valid;
        je["adjust_converged"] = e.adjust_converged;
        je["fw_converged"] = e.fw_converged;
        if (e.rae_available) {
            je["median_flow_rae"] = e.median_flow_rae;
            je["flow_rae_q1"] = e.flow_rae_q1;
            je["flow_rae_q3"] = e.flow_rae_q3;
        }
        if (e.has_time_rae) {
            je["median_time_rae"] = e.median_time_rae;
            je["time_rae_q1"] = e.time_rae_q1;
            je["time_rae_q3"] = e.time_rae_q3;
        }
        je["wall_seconds"] = e.wall_seconds;
        je["peak_rss_bytes"] = e.peak_rss_bytes;
        je["rss_delta_bytes"] = e.rss_delta_bytes;
        if (!e.note.empty()) je["note"] = e.note;
        summary["entries"].push_back(std::move(je));
    }
    std::ofstream js(out_dir + "/summary.json");
    js << summary.dump(2) << '\n';

    write_chart(
        out_dir + "/chart_flow_rae.svg", "Flow RAE vs partition size", report.entries,
        [](const SizeEntry& e) { return e.median_flow_rae; },
        [](const SizeEntry& e) { return e.flow_rae_q1; },
        [](const SizeEntry& e) { return e.flow_rae_q3; }, true);
    write_chart(
        out_dir + "/chart_wall.svg", "Computation time (s) vs partition size",
        report.entries, [](const SizeEntry& e) { return e.wall_seconds; },
        [](const SizeEntry& e) { return e.wall_seconds; },
        [](const SizeEntry& e) { return e.wall_seconds; }, false);
    write_chart(
        out_dir + "/chart_memory.svg", "Peak memory (bytes) vs partition size",
        report.entries,
        [](const SizeEntry& e) { return static_cast<double>(e.peak_rss_bytes); },
        [](const SizeEntry& e) { return static_cast<double>(e.peak_rss_bytes); },
        [](const SizeEntry& e) { return static_cast<double>(e.peak_rss_bytes); }, false);

    bool any_time = false;
    for (const SizeEntry& e : report.entries) any_time |= e.has_time_rae;
    if (any_time)
        write_chart(
            out_dir + "/chart_time_rae.svg", "Travel-time RAE vs partition size",
            report.entries, [](const SizeEntry& e) { return e.median_time_rae; },
            [](const SizeEntry& e) { return e.time_rae_q1; },
            [](const SizeEntry& e) { return e.time_rae_q3; }, true);
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Config, "cannot open config '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail(ErrorCode::Config, std::string("bad config: ") + e.what());
    }

    ExperimentConfig config;
    config.nodes_path = j.value("nodes", "");
    config.edges_path = j.value("edges", "");
    config.tntp_path = j.value("tntp", "");
    config.synth_blocks = j.value("synth_blocks", 0);
    if (j.contains("bins")) config.bins = j["bins"].get<std::vector<std::string>>();
    if (j.contains("fit_flows"))
        config.fit_flow_paths = j["fit_flows"].get<std::vector<std::string>>();
    if (j.contains("validation_flows"))
        config.validation_flow_paths =
            j["validation_flows"].get<std::vector<std::string>>();
    if (j.contains("validation_speeds"))
        config.validation_speed_paths =
            j["validation_speeds"].get<std::vector<std::string>>();
    if (j.contains("strategy")) config.strategy = parse_strategy(j["strategy"]);
    config.use_sweep = j.value("sweep", true);
    config.fixed_resolution = j.value("resolution", -1.0);
    config.min_communities = j.value("min_communities", 0);
    config.max_communities = j.value("max_communities", 0);
    config.k_routes = j.value("k_routes", 4);
    config.seed = j.value("seed", std::uint64_t{0});
    config.out_dir = j.value("out", "");
    config.adjust_config.max_iterations =
        j.value("adjust_max_iterations", config.adjust_config.max_iterations);
    config.adjust_config.tolerance =
        j.value("adjust_tolerance", config.adjust_config.tolerance);
    config.adjust_config.fw.gap_threshold =
        j.value("fw_gap", config.adjust_config.fw.gap_threshold);
    config.fw.gap_threshold = j.value("fw_gap", config.fw.gap_threshold);
    config.fw.free_flow_costs = j.value("free_flow_costs", config.fw.free_flow_costs);
    config.gls.ridge_base = j.value("ridge_base", config.gls.ridge_base);
    config.gls.max_outer_iterations =
        j.value("gls_max_outer_iterations", config.gls.max_outer_iterations);
    config.gls.outer_tolerance = j.value("gls_tolerance", config.gls.outer_tolerance);
    return config;
}

} // namespace partod
