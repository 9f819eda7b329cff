#include "partod/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "partod/csv.hpp"

namespace partod {

std::vector<TimeBin> standard_bins() {
    return {{"AM", 6, 10}, {"MD", 10, 16}, {"PM", 16, 20}};
}

double median(std::vector<double> values) {
    require(!values.empty(), ErrorCode::InvalidInput, "median of empty list");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double nearest_rank_percentile(std::vector<double> values, double percentile) {
    require(!values.empty(), ErrorCode::InvalidInput, "percentile of empty list");
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * n));
    rank = std::max<std::size_t>(rank, 1);
    rank = std::min<std::size_t>(rank, values.size());
    return values[rank - 1];
}

MinuteSeries rolling_mean(const MinuteSeries& series, int window) {
    require(!series.empty(), ErrorCode::InvalidInput, "rolling mean of empty series");
    require(window >= 1, ErrorCode::InvalidInput, "window must be positive");
    MinuteSeries out(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        double sum = 0.0;
        int count = 0;
        const std::size_t lo = i + 1 >= static_cast<std::size_t>(window)
                                   ? i + 1 - static_cast<std::size_t>(window)
                                   : 0;
        for (std::size_t j = lo; j <= i; ++j) {
            if (series[j]) {
                sum += *series[j];
                ++count;
            }
        }
        if (count > 0) out[i] = sum / count;
    }
    return out;
}

double estimate_capacity(const std::vector<double>& smoothed_flows_vpm,
                         std::optional<double> fallback_vph, int min_observations) {
    double max_flow = 0.0;
    for (double v : smoothed_flows_vpm) max_flow = std::max(max_flow, v);
    const bool enough = static_cast<int>(smoothed_flows_vpm.size()) >= min_observations &&
                        max_flow > 0.0;
    if (enough) return 60.0 * max_flow;
    if (fallback_vph && *fallback_vph > 0.0) return *fallback_vph;
    fail(ErrorCode::MissingCapacity, "no capacity observations and no fallback");
}

double estimate_free_flow_time(const std::vector<double>& smoothed_speeds_kmh,
                               double length_km) {
    require(length_km > 0.0, ErrorCode::InvalidInput, "length must be positive");
    if (smoothed_speeds_kmh.empty())
        fail(ErrorCode::MissingSpeed, "no speed observations");
    const double ffs = nearest_rank_percentile(smoothed_speeds_kmh, 95.0);
    if (!(ffs > 0.0)) fail(ErrorCode::MissingSpeed, "free-flow speed is zero");
    return length_km / ffs;
}

double fuse_sensors(const std::vector<double>& readings) {
    require(!readings.empty(), ErrorCode::InvalidInput, "no readings to fuse");
    if (readings.size() == 1) return readings.front();
    const double m = median(readings);
    std::vector<double> deviations;
    deviations.reserve(readings.size());
    for (double r : readings) deviations.push_back(std::fabs(r - m));
    const double mad = median(deviations);

    std::vector<double> survivors;
    for (double r : readings) {
        const bool keep = mad > 0.0 ? std::fabs(r - m) <= 2.0 * mad : r == m;
        if (keep) survivors.push_back(r);
    }
    return median(survivors);
}

std::vector<FlowSampleSet> bin_flows(const RoadNetwork& network,
                                     std::vector<FusedDay> days,
                                     const std::vector<TimeBin>& bins,
                                     std::vector<std::string>* warnings) {
    for (std::size_t i = 0; i < bins.size(); ++i)
        for (std::size_t j = i + 1; j < bins.size(); ++j)
            require(bins[i].end_hour <= bins[j].start_hour ||
                        bins[j].end_hour <= bins[i].start_hour,
                    ErrorCode::InvalidInput, "time bins overlap");

    std::sort(days.begin(), days.end(),
              [](const FusedDay& a, const FusedDay& b) { return a.day < b.day; });

    std::vector<FlowSampleSet> out;
    for (const TimeBin& bin : bins) {
        FlowSampleSet set;
        set.bin = bin.label;
        for (const FusedDay& day : days) {
            FlowSnapshot snap;
            snap.day = day.day;
            snap.bin = bin.label;
            snap.flows.assign(static_cast<std::size_t>(network.edge_count()), 0.0);
            bool complete = true;
            for (int a = 0; a < network.edge_count() && complete; ++a) {
                const MinuteSeries& series = day.edge_flows[static_cast<std::size_t>(a)];
                double sum = 0.0;
                int count = 0;
                const int lo = bin.start_hour * 60;
                const int hi = std::min(bin.end_hour * 60, static_cast<int>(series.size()));
                for (int minute = lo; minute < hi; ++minute) {
                    if (series[static_cast<std::size_t>(minute)]) {
                        sum += *series[static_cast<std::size_t>(minute)];
                        ++count;
                    }
                }
                if (count == 0) {
                    complete = false;
                } else {
                    snap.flows[static_cast<std::size_t>(a)] = 60.0 * sum / count;
                }
            }
            if (complete) {
                snap.sample_index = set.sample_count();
                set.samples.push_back(std::move(snap));
            } else if (warnings) {
                warnings->push_back("dropped snapshot (" + day.day + ", " + bin.label +
                                    "): missing edge data");
            }
        }
        out.push_back(std::move(set));
    }
    return out;
}

namespace {

struct SensorDaySeries {
    MinuteSeries flows = MinuteSeries(kMinutesPerDay);
    MinuteSeries speeds = MinuteSeries(kMinutesPerDay);
};

} // namespace

IngestResult run_ingest(const RoadNetwork& network, const std::string& readings_path,
                        const IngestConfig& config) {
    csv::Table t = csv::read_file(readings_path);
    const int c_sensor = t.require_column("sensor_id");
    const int c_edge = t.require_column("edge_id");
    const int c_date = t.require_column("date");
    const int c_minute = t.require_column("minute_of_day");
    const int c_flow = t.require_column("flow_vpm");
    const int c_speed = t.require_column("speed_kmh");

    // (edge, day) -> sensor -> per-minute series
    std::map<std::pair<int, std::string>, std::map<std::string, SensorDaySeries>> grouped;
    for (const auto& row : t.rows) {
        const std::string& date = row.at(static_cast<std::size_t>(c_date));
        if (!config.start_date.empty() && date < config.start_date) continue;
        if (!config.end_date.empty() && date > config.end_date) continue;
        int a = network.edge_index(row.at(static_cast<std::size_t>(c_edge)));
        require(a >= 0, ErrorCode::Io, "unknown edge id in readings");
        long minute = csv::parse_long(row.at(static_cast<std::size_t>(c_minute)), readings_path);
        require(minute >= 0 && minute < kMinutesPerDay, ErrorCode::Io,
                "minute_of_day out of range");
        auto& series = grouped[{a, date}][row.at(static_cast<std::size_t>(c_sensor))];
        const std::string& flow_cell = row.at(static_cast<std::size_t>(c_flow));
        const std::string& speed_cell = row.at(static_cast<std::size_t>(c_speed));
        if (!flow_cell.empty())
            series.flows[static_cast<std::size_t>(minute)] =
                csv::parse_double(flow_cell, readings_path);
        if (!speed_cell.empty())
            series.speeds[static_cast<std::size_t>(minute)] =
                csv::parse_double(speed_cell, readings_path);
    }

    // Fuse sensors per minute, then organise per (day, edge).
    std::map<std::string, FusedDay> fused_days;
    std::vector<std::vector<double>> smoothed_flows(
        static_cast<std::size_t>(network.edge_count()));
    std::vector<std::vector<double>> smoothed_speeds(
        static_cast<std::size_t>(network.edge_count()));

    for (const auto& [key, sensors] : grouped) {
        const auto& [edge, day] = key;
        auto& fd = fused_days[day];
        if (fd.edge_flows.empty()) {
            fd.day = day;
            fd.edge_flows.assign(static_cast<std::size_t>(network.edge_count()),
                                 MinuteSeries(kMinutesPerDay));
        }
        MinuteSeries fused_flow(kMinutesPerDay);
        MinuteSeries fused_speed(kMinutesPerDay);
        for (int minute = 0; minute < kMinutesPerDay; ++minute) {
            std::vector<double> flow_readings, speed_readings;
            for (const auto& [sensor, series] : sensors) {
                if (series.flows[static_cast<std::size_t>(minute)])
                    flow_readings.push_back(*series.flows[static_cast<std::size_t>(minute)]);
                if (series.speeds[static_cast<std::size_t>(minute)])
                    speed_readings.push_back(*series.speeds[static_cast<std::size_t>(minute)]);
            }
            if (!flow_readings.empty())
                fused_flow[static_cast<std::size_t>(minute)] = fuse_sensors(flow_readings);
            if (!speed_readings.empty())
                fused_speed[static_cast<std::size_t>(minute)] = fuse_sensors(speed_readings);
        }
        fd.edge_flows[static_cast<std::size_t>(edge)] = fused_flow;

        const MinuteSeries flow_smooth = rolling_mean(fused_flow, config.rolling_window);
        const MinuteSeries speed_smooth = rolling_mean(fused_speed, config.rolling_window);
        for (int minute = 0; minute < kMinutesPerDay; ++minute) {
            if (flow_smooth[static_cast<std::size_t>(minute)])
                smoothed_flows[static_cast<std::size_t>(edge)].push_back(
                    *flow_smooth[static_cast<std::size_t>(minute)]);
            if (speed_smooth[static_cast<std::size_t>(minute)])
                smoothed_speeds[static_cast<std::size_t>(edge)].push_back(
                    *speed_smooth[static_cast<std::size_t>(minute)]);
        }
    }

    IngestResult result;

    std::vector<SuperEdge> edges = network.edges();
    for (int a = 0; a < network.edge_count(); ++a) {
        SuperEdge& e = edges[static_cast<std::size_t>(a)];
        std::optional<double> fallback;
        if (e.capacity_vph > 0.0) fallback = e.capacity_vph;
        e.capacity_vph = estimate_capacity(smoothed_flows[static_cast<std::size_t>(a)],
                                           fallback, config.min_capacity_observations);
        try {
            e.t0_hours =
                estimate_free_flow_time(smoothed_speeds[static_cast<std::size_t>(a)],
                                        e.length_km);
        } catch (const Error& err) {
            if (err.code() != ErrorCode::MissingSpeed) throw;
            result.warnings.push_back("edge '" + e.id +
                                      "': no usable speeds, keeping provided t0");
        }
    }
    result.network = RoadNetwork(network.nodes(), std::move(edges));

    std::vector<FusedDay> days;
    days.reserve(fused_days.size());
    for (auto& [day, fd] : fused_days) days.push_back(std::move(fd));
    result.flows_per_bin = bin_flows(result.network, std::move(days), config.bins,
                                     &result.warnings);
    return result;
}

} // namespace partod
