#include "cgame/simkit.hpp"

#include "cgame/error.hpp"
#include "cgame/io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace cgame::simkit {

namespace fs = std::filesystem;
using nlohmann::json;

void NetworkConfig::validate() const {
    if (rows < 2) throw ConfigError("must be >= 2", "network.rows");
    if (cols < 2) throw ConfigError("must be >= 2", "network.cols");
    if (!(link_length_m > 0.0) || !std::isfinite(link_length_m)) throw ConfigError("must be positive", "network.link_length_m");
}

void SimConfig::validate() const {
    if (n_items < 1) throw ConfigError("must be >= 1", "sim.n_items");
    if (n_t < 1) throw ConfigError("must be >= 1", "sim.n_t");
    if (!(slice_s > 0.0)) throw ConfigError("must be positive", "sim.slice_s");
    if (trips_max < trips_min) throw ConfigError("must be >= sim.trips_min", "sim.trips_max");
    if (!(speed_mean > 0.0)) throw ConfigError("must be positive", "sim.speed_mean");
    if (!(speed_sd >= 0.0)) throw ConfigError("must be non-negative", "sim.speed_sd");
    if (!(speed_floor > 0.0)) throw ConfigError("must be positive", "sim.speed_floor");
    if (!(period_s > 0.0)) throw ConfigError("must be positive", "sim.period_s");
    if (route_cap < 1) throw ConfigError("must be >= 1", "sim.route_cap");
    if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw ConfigError("must lie in (0, 1]", "sim.train_fraction");
    demand_profile().validate();
}

void DatasetConfig::validate() const {
    network.validate();
    sim.validate();
}

void to_json(json& j, const NetworkConfig& c) {
    j = json{{"rows", c.rows}, {"cols", c.cols}, {"link_length_m", c.link_length_m}};
}

void to_json(json& j, const SimConfig& c) {
    j = json{{"n_items", c.n_items},
             {"n_t", c.n_t},
             {"slice_s", c.slice_s},
             {"trips_min", c.trips_min},
             {"trips_max", c.trips_max},
             {"concentration", c.concentration},
             {"hotspot_fraction", c.hotspot_fraction},
             {"hotspot_boost", c.hotspot_boost},
             {"speed_mean", c.speed_mean},
             {"speed_sd", c.speed_sd},
             {"speed_floor", c.speed_floor},
             {"period_s", c.period_s},
             {"route_cap", c.route_cap},
             {"train_fraction", c.train_fraction},
             {"seed", c.seed}};
}

NetworkConfig network_config_from_json(const json& j, const std::string& prefix) {
    io::StrictObject o(j, prefix);
    o.allow_only({"rows", "cols", "link_length_m"});
    NetworkConfig c;
    o.read("rows", c.rows);
    o.read("cols", c.cols);
    o.read("link_length_m", c.link_length_m);
    return c;
}

SimConfig sim_config_from_json(const json& j, const std::string& prefix) {
    io::StrictObject o(j, prefix);
    o.allow_only({"n_items", "n_t", "slice_s", "trips_min", "trips_max", "concentration", "hotspot_fraction",
                  "hotspot_boost", "speed_mean", "speed_sd", "speed_floor", "period_s", "route_cap", "train_fraction",
                  "seed"});
    SimConfig c;
    o.read("n_items", c.n_items);
    o.read("n_t", c.n_t);
    o.read("slice_s", c.slice_s);
    o.read("trips_min", c.trips_min);
    o.read("trips_max", c.trips_max);
    o.read("concentration", c.concentration);
    o.read("hotspot_fraction", c.hotspot_fraction);
    o.read("hotspot_boost", c.hotspot_boost);
    o.read("speed_mean", c.speed_mean);
    o.read("speed_sd", c.speed_sd);
    o.read("speed_floor", c.speed_floor);
    o.read("period_s", c.period_s);
    o.read("route_cap", c.route_cap);
    o.read("train_fraction", c.train_fraction);
    o.read("seed", c.seed);
    return c;
}

TravelTimeModel::TravelTimeModel(double speed_mean, double speed_sd, double speed_floor, double truncation_sigmas)
    : mean_(speed_mean), sd_(speed_sd), floor_(speed_floor), trunc_(truncation_sigmas) {
    if (!(mean_ > 0.0)) throw ConfigError("travel-time model: mean speed must be positive", "sim.speed_mean");
    if (!(sd_ >= 0.0)) throw ConfigError("travel-time model: speed sd must be non-negative", "sim.speed_sd");
    if (!(floor_ > 0.0)) throw ConfigError("travel-time model: speed floor must be positive", "sim.speed_floor");
    if (!(trunc_ > 0.0)) throw ConfigError("travel-time model: truncation must be positive");
}

double TravelTimeModel::sample_speed(Rng& rng) const {
    if (sd_ == 0.0) return std::max(mean_, floor_);
    std::normal_distribution<double> normal(mean_, sd_);
    double v = normal(rng);
    while (std::abs(v - mean_) > trunc_ * sd_) v = normal(rng);
    return std::max(v, floor_);
}

double TravelTimeModel::sample_travel_time(const netgen::Link& link, Rng& rng) const {
    const double t = link.length_m / sample_speed(rng);
    if (!(t > 0.0) || !std::isfinite(t)) throw ConfigError("travel-time model produced a non-positive travel time");
    return t;
}

TimedRoute timestamp_route(const netgen::Trip& trip, const netgen::Route& route, const netgen::RoadNetwork& network,
                           const TravelTimeModel& travel, std::size_t n_t, double slice_s, Rng& rng) {
    if (!(slice_s > 0.0)) throw ConfigError("slice length must be positive", "sim.slice_s");
    if (route.origin != trip.origin || route.destination != trip.destination) {
        throw DataError("trip and route endpoints differ");
    }
    const double horizon = static_cast<double>(n_t) * slice_s;
    TimedRoute out{trip.origin, trip.destination, {}, 1};
    out.steps.reserve(route.links.size());
    double entry = trip.depart_time_s;
    for (LinkId id : route.links) {
        if (entry >= horizon) break;
        const auto slice = static_cast<std::uint32_t>(std::floor(entry / slice_s));
        out.steps.push_back({id, std::min<std::uint32_t>(slice, static_cast<std::uint32_t>(n_t - 1))});
        entry += travel.sample_travel_time(network.link(id), rng);
    }
    return out;
}

TimedRoute timestamp_route(const netgen::Trip& trip, const netgen::Route& route, const netgen::RoadNetwork& network,
                           const TravelTimeModel& travel, std::size_t n_t, double slice_s, std::uint64_t seed) {
    Rng rng(derive_seed(seed, streams::kTravel));
    return timestamp_route(trip, route, network, travel, n_t, slice_s, rng);
}

TrafficCountsMatrix accumulate_counts(std::span<const TimedRoute> routes, std::size_t n_links, std::size_t n_slices,
                                      double slice_s) {
    std::vector<std::uint64_t> counts(n_links * n_slices, 0);
    for (const auto& r : routes) {
        for (const auto& s : r.steps) {
            if (s.link >= n_links) throw IndexError("accumulate_counts: link " + std::to_string(s.link) + " out of range");
            if (s.slice >= n_slices) throw IndexError("accumulate_counts: slice " + std::to_string(s.slice) + " out of range");
            counts[static_cast<std::size_t>(s.link) * n_slices + s.slice] += r.trip_count;
        }
    }
    std::vector<double> values(counts.begin(), counts.end());
    return {Matrix(n_links, n_slices, std::move(values)), slice_s};
}

ODMatrix accumulate_od(std::span<const TimedRoute> routes, std::size_t n_spots) {
    std::vector<std::uint64_t> counts(n_spots * n_spots, 0);
    for (const auto& r : routes) {
        if (r.origin >= n_spots || r.destination >= n_spots) {
            throw IndexError("accumulate_od: spot out of range");
        }
        counts[static_cast<std::size_t>(r.origin) * n_spots + r.destination] += r.trip_count;
    }
    std::vector<double> values(counts.begin(), counts.end());
    return {Matrix(n_spots, n_spots, std::move(values))};
}

SimulationContext::SimulationContext(const DatasetConfig& cfg)
    : config(cfg),
      network(netgen::build_grid(cfg.network.rows, cfg.network.cols, cfg.network.link_length_m)),
      dictionary(netgen::build_route_dictionary(network, cfg.sim.route_cap)) {
    config.validate();
}

std::uint64_t item_seed(std::uint64_t dataset_seed, std::size_t index) noexcept {
    return derive_seed(dataset_seed, streams::kItem, index);
}

GeneratedItem generate_item(const SimulationContext& ctx, std::uint64_t seed) {
    const SimConfig& sim = ctx.config.sim;
    Rng volume_rng(derive_seed(seed, streams::kVolume));
    std::uniform_int_distribution<std::size_t> volume(sim.trips_min, sim.trips_max);
    const std::size_t trips = volume(volume_rng);

    const auto table = netgen::sample_demand(ctx.dictionary, trips, sim.period_s, seed, sim.demand_profile());
    const TravelTimeModel travel(sim.speed_mean, sim.speed_sd, sim.speed_floor);
    Rng travel_rng(derive_seed(seed, streams::kTravel));

    GeneratedItem out;
    out.trips = trips;
    out.routes.reserve(table.trips.size());
    for (const auto& trip : table.trips) {
        const auto& route = ctx.dictionary.routes(trip.origin, trip.destination).at(trip.route_index);
        out.routes.push_back(timestamp_route(trip, route, ctx.network, travel, sim.n_t, sim.slice_s, travel_rng));
    }
    out.item.counts = accumulate_counts(out.routes, ctx.network.link_count(), sim.n_t, sim.slice_s);
    out.item.od = accumulate_od(out.routes, ctx.network.spot_count());
    return out;
}

DatasetSplit make_split(std::size_t n_items, double train_fraction, std::uint64_t seed) {
    std::vector<std::size_t> order(n_items);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, streams::kSplit));
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_train =
        std::min(n_items, static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n_items))));
    DatasetSplit split;
    split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.validation.begin(), split.validation.end());
    return split;
}

Dataset generate_dataset(const DatasetConfig& config, std::uint64_t seed) {
    DatasetConfig cfg = config;
    cfg.sim.seed = seed;
    const SimulationContext ctx(cfg);

    Dataset ds;
    ds.meta.config = cfg;
    ds.meta.n_links = ctx.network.link_count();
    ds.meta.n_spots = ctx.network.spot_count();
    ds.items.reserve(cfg.sim.n_items);
    ds.meta.item_trips.reserve(cfg.sim.n_items);
    for (std::size_t i = 0; i < cfg.sim.n_items; ++i) {
        auto gen = generate_item(ctx, item_seed(seed, i));
        ds.items.push_back(std::move(gen.item));
        ds.meta.item_trips.push_back(gen.trips);
    }
    ds.split = make_split(cfg.sim.n_items, cfg.sim.train_fraction, seed);
    return ds;
}

Dataset generate_dataset(const DatasetConfig& config) { return generate_dataset(config, config.sim.seed); }

namespace {

void check_split(const DatasetSplit& split, std::size_t n) {
    std::vector<int> seen(n, 0);
    for (auto idx : split.train) {
        if (idx >= n) throw IndexError("split index out of range");
        ++seen[idx];
    }
    for (auto idx : split.validation) {
        if (idx >= n) throw IndexError("split index out of range");
        ++seen[idx];
    }
    if (std::any_of(seen.begin(), seen.end(), [](int c) { return c != 1; })) {
        throw FormatError("split indices must partition the items");
    }
}

} // namespace

void save_dataset(const Dataset& ds, const fs::path& dir) {
    const std::size_t n_l = ds.n_links();
    const std::size_t n_t = ds.n_slices();
    const std::size_t n_p = ds.n_spots();
    check_split(ds.split, ds.items.size());

    std::vector<std::uint8_t> blob;
    blob.reserve(ds.items.size() * (n_l * n_t + n_p * n_p) * 4);
    for (std::size_t i = 0; i < ds.items.size(); ++i) {
        const auto& item = ds.items[i];
        numcore::require_shape(item.counts.values, n_l, n_t, "item " + std::to_string(i) + " traffic counts");
        numcore::require_shape(item.od.values, n_p, n_p, "item " + std::to_string(i) + " OD matrix");
        io::append_f32le(blob, item.counts.values.values());
        io::append_f32le(blob, item.od.values.values());
    }

    json manifest{{"format", "cgame-dataset"},
                  {"version", kDatasetFormatVersion},
                  {"n_l", n_l},
                  {"n_t", n_t},
                  {"n_p", n_p},
                  {"slice_s", ds.meta.config.sim.slice_s},
                  {"n_items", ds.items.size()},
                  {"seed", ds.meta.config.sim.seed},
                  {"network", ds.meta.config.network},
                  {"sim", ds.meta.config.sim},
                  {"item_trips", ds.meta.item_trips},
                  {"split", {{"train", ds.split.train}, {"validation", ds.split.validation}}},
                  {"blob", {{"file", "data.bin"},
                            {"bytes", blob.size()},
                            {"sha256", io::sha256_hex(blob)},
                            {"dtype", "float32-le"},
                            {"layout", "per item: F (n_l x n_t) then D (n_p x n_p), row-major"}}}};

    io::write_directory_atomically(dir, [&](const fs::path& tmp) {
        io::write_text(tmp / "manifest.json", manifest.dump(2) + "\n");
        io::write_file(tmp / "data.bin", blob);
    });
}

Dataset load_dataset(const fs::path& dir) {
    const json manifest = io::read_json(dir / "manifest.json");
    try {
        if (!manifest.is_object() || manifest.value("format", "") != "cgame-dataset") {
            throw FormatError("not a dataset manifest: " + (dir / "manifest.json").string());
        }
        const int version = manifest.at("version").get<int>();
        if (version != kDatasetFormatVersion) {
            throw VersionError("unsupported dataset format version " + std::to_string(version) + " (supported: " +
                               std::to_string(kDatasetFormatVersion) + ")");
        }

        Dataset ds;
        ds.meta.config.network = network_config_from_json(manifest.at("network"));
        ds.meta.config.sim = sim_config_from_json(manifest.at("sim"));
        ds.meta.n_links = manifest.at("n_l").get<std::size_t>();
        ds.meta.n_spots = manifest.at("n_p").get<std::size_t>();
        const auto n_t = manifest.at("n_t").get<std::size_t>();
        const auto n_items = manifest.at("n_items").get<std::size_t>();
        if (n_t != ds.meta.config.sim.n_t) throw FormatError("manifest n_t disagrees with sim config");
        ds.meta.item_trips = manifest.at("item_trips").get<std::vector<std::size_t>>();
        ds.split.train = manifest.at("split").at("train").get<std::vector<std::size_t>>();
        ds.split.validation = manifest.at("split").at("validation").get<std::vector<std::size_t>>();
        check_split(ds.split, n_items);

        const auto& blob_meta = manifest.at("blob");
        const auto blob = io::read_file(dir / blob_meta.at("file").get<std::string>());
        const std::size_t n_l = ds.meta.n_links;
        const std::size_t n_p = ds.meta.n_spots;
        const std::size_t expected = n_items * (n_l * n_t + n_p * n_p) * 4;
        if (blob.size() != expected || blob.size() != blob_meta.at("bytes").get<std::size_t>()) {
            throw ShapeError("data.bin holds " + std::to_string(blob.size()) + " bytes, manifest shapes require " +
                             std::to_string(expected));
        }
        if (io::sha256_hex(blob) != blob_meta.at("sha256").get<std::string>()) {
            throw ChecksumError("data.bin SHA-256 does not match the manifest");
        }

        std::size_t offset = 0;
        ds.items.reserve(n_items);
        for (std::size_t i = 0; i < n_items; ++i) {
            DatasetItem item;
            item.counts = {Matrix(n_l, n_t, io::read_f32le(blob, offset, n_l * n_t)), ds.meta.config.sim.slice_s};
            item.od = {Matrix(n_p, n_p, io::read_f32le(blob, offset, n_p * n_p))};
            ds.items.push_back(std::move(item));
        }
        return ds;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed dataset manifest: ") + e.what());
    }
}

} // namespace cgame::simkit
