#pragma once

#include <optional>
#include <string>
#include <vector>

#include "partod/network.hpp"

namespace partod {

/// Per-minute values for one day; nullopt = missing minute.
using MinuteSeries = std::vector<std::optional<double>>;

constexpr int kMinutesPerDay = 24 * 60;

struct TimeBin {
    std::string label;
    int start_hour = 0;  // inclusive
    int end_hour = 0;    // exclusive

    bool contains_minute(int minute_of_day) const {
        return minute_of_day >= start_hour * 60 && minute_of_day < end_hour * 60;
    }
};

/// AM [6,10), MD [10,16), PM [16,20).
std::vector<TimeBin> standard_bins();

/// Trailing mean over the last `window` minutes; missing values are excluded
/// from each mean and an all-missing window stays missing.
MinuteSeries rolling_mean(const MinuteSeries& series, int window = 10);

/// Capacity from the maximum observed smoothed per-minute flow (x60), used
/// only when at least `min_observations` minutes are available; otherwise the
/// fallback (provided network value).
double estimate_capacity(const std::vector<double>& smoothed_flows_vpm,
                         std::optional<double> fallback_vph,
                         int min_observations = 1000);

/// Free-flow travel time: length over the nearest-rank 95th percentile of the
/// smoothed speeds.
double estimate_free_flow_time(const std::vector<double>& smoothed_speeds_kmh,
                               double length_km);

/// Median/MAD outlier rejection across sensors for one minute. Readings more
/// than twice the MAD from the median are discarded; with MAD = 0 only
/// readings equal to the median survive. Returns the survivors' median.
double fuse_sensors(const std::vector<double>& readings);

double median(std::vector<double> values);
double nearest_rank_percentile(std::vector<double> values, double percentile);

/// Fused per-minute flows for every edge of one day.
struct FusedDay {
    std::string day;
    std::vector<MinuteSeries> edge_flows;  // indexed by edge
};

/// Mean hourly flow per (day, bin); snapshots missing any edge are dropped
/// with a warning. Days are processed in sorted order.
std::vector<FlowSampleSet> bin_flows(const RoadNetwork& network,
                                     std::vector<FusedDay> days,
                                     const std::vector<TimeBin>& bins,
                                     std::vector<std::string>* warnings);

struct IngestConfig {
    std::vector<TimeBin> bins = standard_bins();
    int rolling_window = 10;
    int min_capacity_observations = 1000;
    std::string start_date;  // inclusive ISO date filter; empty = open
    std::string end_date;
};

struct IngestResult {
    std::vector<FlowSampleSet> flows_per_bin;
    RoadNetwork network;  // input network with estimated capacity / t0
    std::vector<std::string> warnings;
};

/// Full detector pipeline: readings.csv (sensor_id,edge_id,date,
/// minute_of_day,flow_vpm,speed_kmh) -> fused, binned snapshots plus
/// capacity and free-flow estimates. Provided network values act as the
/// fallback where data is insufficient.
IngestResult run_ingest(const RoadNetwork& network, const std::string& readings_path,
                        const IngestConfig& config);

} // namespace partod
