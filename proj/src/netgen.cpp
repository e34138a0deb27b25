#include "cgame/netgen.hpp"

#include "cgame/error.hpp"
#include "cgame/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

namespace cgame::netgen {

RoadNetwork::RoadNetwork(std::size_t rows, std::size_t cols, std::vector<Link> links)
    : rows_(rows), cols_(cols), links_(std::move(links)), out_(rows * cols) {
    for (std::size_t i = 0; i < links_.size(); ++i) {
        const Link& l = links_[i];
        if (l.id != i) throw DataError("RoadNetwork: link ids must be dense and ordered");
        if (l.from >= spot_count() || l.to >= spot_count()) throw IndexError("RoadNetwork: link endpoint out of range");
        out_[l.from].push_back(l.id);
    }
    for (auto& o : out_) std::sort(o.begin(), o.end());
}

const Link& RoadNetwork::link(LinkId id) const {
    if (id >= links_.size()) throw IndexError("link id " + std::to_string(id) + " out of range");
    return links_[id];
}

std::span<const LinkId> RoadNetwork::out_links(SpotId spot) const {
    if (spot >= spot_count()) throw IndexError("spot id " + std::to_string(spot) + " out of range");
    return out_[spot];
}

std::optional<LinkId> RoadNetwork::link_between(SpotId from, SpotId to) const {
    for (LinkId id : out_links(from))
        if (links_[id].to == to) return id;
    return std::nullopt;
}

std::size_t RoadNetwork::manhattan(SpotId a, SpotId b) const noexcept {
    const auto dr = static_cast<std::ptrdiff_t>(row_of(a)) - static_cast<std::ptrdiff_t>(row_of(b));
    const auto dc = static_cast<std::ptrdiff_t>(col_of(a)) - static_cast<std::ptrdiff_t>(col_of(b));
    return static_cast<std::size_t>(std::abs(dr) + std::abs(dc));
}

RoadNetwork build_grid(std::size_t rows, std::size_t cols, double link_length_m) {
    if (rows < 2) throw ConfigError("grid needs at least 2 rows", "network.rows");
    if (cols < 2) throw ConfigError("grid needs at least 2 columns", "network.cols");
    if (!(link_length_m > 0.0) || !std::isfinite(link_length_m)) {
        throw ConfigError("link length must be positive", "network.link_length_m");
    }

    std::vector<std::pair<SpotId, SpotId>> pairs;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const auto s = static_cast<SpotId>(r * cols + c);
            if (c + 1 < cols) {
                pairs.emplace_back(s, s + 1);
                pairs.emplace_back(s + 1, s);
            }
            if (r + 1 < rows) {
                const auto below = static_cast<SpotId>(s + cols);
                pairs.emplace_back(s, below);
                pairs.emplace_back(below, s);
            }
        }
    }
    std::sort(pairs.begin(), pairs.end());

    std::vector<Link> links;
    links.reserve(pairs.size());
    for (const auto& [from, to] : pairs) {
        links.push_back({static_cast<LinkId>(links.size()), from, to, link_length_m});
    }
    return RoadNetwork(rows, cols, std::move(links));
}

std::vector<Route> enumerate_routes(const RoadNetwork& network, SpotId origin, SpotId destination, std::size_t cap) {
    if (origin >= network.spot_count() || destination >= network.spot_count()) {
        throw IndexError("enumerate_routes: spot out of range");
    }
    if (origin == destination) throw ConfigError("origin and destination must differ");
    if (cap == 0) throw ConfigError("route cap must be at least 1", "sim.route_cap");

    std::vector<Route> routes;
    std::vector<LinkId> path;

    // Every hop must reduce the Manhattan distance, which makes paths simple and minimal.
    auto dfs = [&](auto&& self, SpotId at) -> void {
        if (routes.size() >= cap) return;
        if (at == destination) {
            routes.push_back({origin, destination, path});
            return;
        }
        const std::size_t remaining = network.manhattan(at, destination);
        for (LinkId id : network.out_links(at)) {
            const SpotId next = network.link(id).to;
            if (network.manhattan(next, destination) + 1 != remaining) continue;
            path.push_back(id);
            self(self, next);
            path.pop_back();
            if (routes.size() >= cap) return;
        }
    };
    dfs(dfs, origin);
    return routes;
}

void validate_route(const RoadNetwork& network, const Route& route) {
    if (route.links.empty()) throw DataError("route has no links");
    if (route.links.size() != network.manhattan(route.origin, route.destination)) {
        throw DataError("route hop count differs from the Manhattan distance");
    }
    SpotId at = route.origin;
    std::vector<bool> seen(network.spot_count(), false);
    seen[at] = true;
    for (LinkId id : route.links) {
        const Link& l = network.link(id);
        if (l.from != at) throw DataError("route links are not connected");
        at = l.to;
        if (seen[at]) throw DataError("route revisits a spot");
        seen[at] = true;
    }
    if (at != route.destination) throw DataError("route does not end at its destination");
}

RouteDictionary::RouteDictionary(std::size_t spot_count)
    : spot_count_(spot_count), entries_(spot_count * spot_count) {}

std::size_t RouteDictionary::index(SpotId origin, SpotId destination) const {
    if (origin >= spot_count_ || destination >= spot_count_) throw IndexError("route dictionary: spot out of range");
    if (origin == destination) throw IndexError("route dictionary has no entry for origin == destination");
    return static_cast<std::size_t>(origin) * spot_count_ + destination;
}

std::size_t RouteDictionary::entry_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(entries_.begin(), entries_.end(), [](const auto& e) { return !e.empty(); }));
}

std::size_t RouteDictionary::route_count() const noexcept {
    return std::accumulate(entries_.begin(), entries_.end(), std::size_t{0},
                           [](std::size_t acc, const auto& e) { return acc + e.size(); });
}

const std::vector<Route>& RouteDictionary::routes(SpotId origin, SpotId destination) const {
    return entries_[index(origin, destination)];
}

void RouteDictionary::set_routes(SpotId origin, SpotId destination, std::vector<Route> routes) {
    entries_[index(origin, destination)] = std::move(routes);
}

RouteDictionary build_route_dictionary(const RoadNetwork& network, std::size_t cap) {
    RouteDictionary dict(network.spot_count());
    const auto n = static_cast<SpotId>(network.spot_count());
    for (SpotId o = 0; o < n; ++o)
        for (SpotId d = 0; d < n; ++d)
            if (o != d) dict.set_routes(o, d, enumerate_routes(network, o, d, cap));
    return dict;
}

void DemandProfile::validate() const {
    if (uniform) return;
    if (!(concentration > 0.0)) throw ConfigError("Dirichlet concentration must be positive", "sim.concentration");
    if (!(hotspot_fraction >= 0.0 && hotspot_fraction <= 1.0)) {
        throw ConfigError("hotspot fraction must lie in [0, 1]", "sim.hotspot_fraction");
    }
    if (!(hotspot_boost >= 1.0)) throw ConfigError("hotspot boost must be >= 1", "sim.hotspot_boost");
}

TripTable sample_demand(const RouteDictionary& dictionary, std::size_t total_trips, double period_s,
                        std::uint64_t seed, const DemandProfile& profile) {
    if (dictionary.empty()) throw ConfigError("route dictionary is empty");
    if (!(period_s > 0.0)) throw ConfigError("period must be positive", "sim.period_s");
    profile.validate();

    const auto n = static_cast<SpotId>(dictionary.spot_count());
    std::vector<std::pair<SpotId, SpotId>> pairs;
    for (SpotId o = 0; o < n; ++o)
        for (SpotId d = 0; d < n; ++d)
            if (o != d && !dictionary.routes(o, d).empty()) pairs.emplace_back(o, d);

    TripTable table;
    table.period_s = period_s;
    if (total_trips == 0) return table;

    Rng rng(derive_seed(seed, streams::kDemand));
    std::vector<double> weights(pairs.size(), 1.0);
    if (!profile.uniform) {
        std::gamma_distribution<double> gamma(profile.concentration, 1.0);
        for (double& w : weights) w = gamma(rng);
        const auto hotspots = static_cast<std::size_t>(std::llround(profile.hotspot_fraction * pairs.size()));
        std::vector<std::size_t> order(pairs.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t i = 0; i < hotspots && i < order.size(); ++i) weights[order[i]] *= profile.hotspot_boost;
        if (std::accumulate(weights.begin(), weights.end(), 0.0) <= 0.0) std::fill(weights.begin(), weights.end(), 1.0);
    }

    std::discrete_distribution<std::size_t> pick_pair(weights.begin(), weights.end());
    std::uniform_real_distribution<double> depart(0.0, period_s);
    table.trips.reserve(total_trips);
    for (std::size_t k = 0; k < total_trips; ++k) {
        const auto [o, d] = pairs[pick_pair(rng)];
        const std::size_t n_routes = dictionary.routes(o, d).size();
        std::uniform_int_distribution<std::size_t> pick_route(0, n_routes - 1);
        const std::size_t route = pick_route(rng);
        double t = depart(rng);
        if (t >= period_s) t = std::nextafter(period_s, 0.0);
        table.trips.push_back({o, d, t, route});
    }
    return table;
}

} // namespace cgame::netgen
