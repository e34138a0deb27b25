#pragma once

#include "cgame/netgen.hpp"
#include "cgame/numcore.hpp"
#include "cgame/random.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cgame::simkit {

using netgen::LinkId;
using netgen::SpotId;
using numcore::Matrix;

struct NetworkConfig {
    std::size_t rows = 6;
    std::size_t cols = 6;
    double link_length_m = 2000.0;

    void validate() const;
    friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

struct SimConfig {
    std::size_t n_items = 12292;
    std::size_t n_t = 12;
    double slice_s = 300.0;
    std::size_t trips_min = 20000;
    std::size_t trips_max = 30000;
    double concentration = 1.0;
    double hotspot_fraction = 0.05;
    double hotspot_boost = 10.0;
    double speed_mean = 12.0;
    double speed_sd = 2.0;
    double speed_floor = 1.0;
    double period_s = 3600.0;
    std::size_t route_cap = 256;
    double train_fraction = 0.8;
    std::uint64_t seed = 0;

    void validate() const;
    netgen::DemandProfile demand_profile() const { return {concentration, hotspot_fraction, hotspot_boost, false}; }
    friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

struct DatasetConfig {
    NetworkConfig network;
    SimConfig sim;

    void validate() const;
    friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

void to_json(nlohmann::json& j, const NetworkConfig& c);
void to_json(nlohmann::json& j, const SimConfig& c);
/// Strict readers: unknown keys and wrong types raise ConfigError naming `<prefix>.<key>`.
NetworkConfig network_config_from_json(const nlohmann::json& j, const std::string& prefix = "network");
SimConfig sim_config_from_json(const nlohmann::json& j, const std::string& prefix = "sim");

/// Per-link travel time = length / speed with speed ~ N(mean, sd) truncated at +-3 sd and
/// floored at `speed_floor`.
class TravelTimeModel {
public:
    TravelTimeModel(double speed_mean, double speed_sd, double speed_floor = 1.0, double truncation_sigmas = 3.0);

    double sample_speed(Rng& rng) const;
    double sample_travel_time(const netgen::Link& link, Rng& rng) const;

private:
    double mean_;
    double sd_;
    double floor_;
    double trunc_;
};

struct TimedStep {
    LinkId link = 0;
    std::uint32_t slice = 0;
    friend bool operator==(const TimedStep&, const TimedStep&) = default;
};

struct TimedRoute {
    SpotId origin = 0;
    SpotId destination = 0;
    std::vector<TimedStep> steps;
    std::uint64_t trip_count = 1;

    friend bool operator==(const TimedRoute&, const TimedRoute&) = default;
};

/// Link x time-slice vehicle counts.
struct TrafficCountsMatrix {
    Matrix values; // n_l x n_t
    double slice_s = 0.0;

    std::size_t n_links() const noexcept { return values.rows(); }
    std::size_t n_slices() const noexcept { return values.cols(); }
    friend bool operator==(const TrafficCountsMatrix&, const TrafficCountsMatrix&) = default;
};

/// Trips per (origin, destination) over the whole period.
struct ODMatrix {
    Matrix values; // n_p x n_p

    std::size_t n_spots() const noexcept { return values.rows(); }
    friend bool operator==(const ODMatrix&, const ODMatrix&) = default;
};

/// Assigns each link of the trip's route the slice containing its entry time. Steps entered
/// at or after n_t * slice_s are dropped.
TimedRoute timestamp_route(const netgen::Trip& trip, const netgen::Route& route, const netgen::RoadNetwork& network,
                           const TravelTimeModel& travel, std::size_t n_t, double slice_s, Rng& rng);
TimedRoute timestamp_route(const netgen::Trip& trip, const netgen::Route& route, const netgen::RoadNetwork& network,
                           const TravelTimeModel& travel, std::size_t n_t, double slice_s, std::uint64_t seed);

TrafficCountsMatrix accumulate_counts(std::span<const TimedRoute> routes, std::size_t n_links, std::size_t n_slices,
                                      double slice_s = 0.0);
ODMatrix accumulate_od(std::span<const TimedRoute> routes, std::size_t n_spots);

struct DatasetItem {
    TrafficCountsMatrix counts;
    ODMatrix od;
    friend bool operator==(const DatasetItem&, const DatasetItem&) = default;
};

struct DatasetSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

struct DatasetMeta {
    DatasetConfig config;
    std::size_t n_links = 0;
    std::size_t n_spots = 0;
    std::vector<std::size_t> item_trips; // trips generated for each item
    friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

struct Dataset {
    std::vector<DatasetItem> items;
    DatasetSplit split;
    DatasetMeta meta;

    std::size_t n_links() const noexcept { return meta.n_links; }
    std::size_t n_slices() const noexcept { return meta.config.sim.n_t; }
    std::size_t n_spots() const noexcept { return meta.n_spots; }
    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Everything one simulated item produces, including the timed routes behind F and D.
struct GeneratedItem {
    DatasetItem item;
    std::vector<TimedRoute> routes;
    std::size_t trips = 0;
};

/// Shared, read-only inputs for item generation.
struct SimulationContext {
    DatasetConfig config;
    netgen::RoadNetwork network;
    netgen::RouteDictionary dictionary;

    explicit SimulationContext(const DatasetConfig& config);
};

GeneratedItem generate_item(const SimulationContext& ctx, std::uint64_t item_seed);
std::uint64_t item_seed(std::uint64_t dataset_seed, std::size_t index) noexcept;

/// Deterministic shuffled split; train size is round(fraction * n).
DatasetSplit make_split(std::size_t n_items, double train_fraction, std::uint64_t seed);

Dataset generate_dataset(const DatasetConfig& config, std::uint64_t seed);
Dataset generate_dataset(const DatasetConfig& config);

inline constexpr int kDatasetFormatVersion = 1;

/// Writes `dir/manifest.json` and `dir/data.bin` (replacing any existing dataset atomically).
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

} // namespace cgame::simkit
