#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "partod/adjustment.hpp"
#include "partod/estimation.hpp"
#include "partod/synth.hpp"

namespace partod {

enum class Strategy { Unpartitioned, Degenerate, Internal, External, Combined };

Strategy parse_strategy(const std::string& name);
std::string strategy_name(Strategy strategy);

struct ExperimentConfig {
    // Network source: CSV pair, TNTP file, or synthetic blocks (> 0).
    std::string nodes_path;
    std::string edges_path;
    std::string tntp_path;
    int synth_blocks = 0;
    SynthConfig synth;

    // Flow samples per time bin; ignored when synthesizing.
    std::vector<std::string> bins;
    std::vector<std::string> fit_flow_paths;
    std::vector<std::string> validation_flow_paths;
    std::vector<std::string> validation_speed_paths;  // optional, same order

    Strategy strategy = Strategy::Unpartitioned;
    bool use_sweep = true;
    double fixed_resolution = -1.0;  // >= 0 selects one resolution instead
    int min_communities = 0;         // both > 0: filter sweep entries
    int max_communities = 0;

    int k_routes = 4;
    GlsConfig gls;
    AdjustmentConfig adjust_config;
    FrankWolfeConfig fw;
    std::uint64_t seed = 0;
    std::string out_dir;
};

/// One attempted partition size for one time bin.
struct SizeEntry {
    std::string strategy;
    std::string bin;
    int community_count = 0;
    double pct_supernodes = 0.0;  // mean share: 100 / community count
    double resolution = 0.0;
    bool valid = false;            // pipeline completed
    bool rae_available = false;    // false for non-converged adjustments
    bool adjust_converged = false;
    bool fw_converged = false;
    double median_flow_rae = 0.0, flow_rae_q1 = 0.0, flow_rae_q3 = 0.0;
    bool has_time_rae = false;
    double median_time_rae = 0.0, time_rae_q1 = 0.0, time_rae_q3 = 0.0;
    double wall_seconds = 0.0;
    long peak_rss_bytes = 0;  // process high-water mark after the entry
    long rss_delta_bytes = 0;
    std::string note;
};

struct ExperimentReport {
    std::vector<SizeEntry> entries;
    std::vector<std::string> warnings;
    double total_wall_seconds = 0.0;
    long peak_rss_bytes = 0;
};

/// Runs the selected strategy end-to-end for every partition size in the
/// sweep (or the single configured size). Per-size failures are recorded,
/// not fatal; configuration errors throw before any computation.
ExperimentReport run_experiment(const ExperimentConfig& config);

/// Writes report.csv, summary.json and the SVG charts into `out_dir`.
void write_report(const ExperimentReport& report, const ExperimentConfig& config,
                  const std::string& out_dir);

/// Loads a JSON config file (same keys as the CLI flags).
ExperimentConfig load_config(const std::string& path);

/// Process peak resident set size in bytes (VmHWM).
long current_peak_rss_bytes();

} // namespace partod
