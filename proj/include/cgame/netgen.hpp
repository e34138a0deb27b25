#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace cgame::netgen {

using SpotId = std::uint32_t;
using LinkId = std::uint32_t;

struct Link {
    LinkId id = 0;
    SpotId from = 0;
    SpotId to = 0;
    double length_m = 0.0;

    friend bool operator==(const Link&, const Link&) = default;
};

/// Rectangular grid of zones (one per intersection) joined by directed links in both
/// directions between grid neighbours. Spots are numbered row-major, links sorted by (from, to).
class RoadNetwork {
public:
    RoadNetwork() = default;
    RoadNetwork(std::size_t rows, std::size_t cols, std::vector<Link> links);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t spot_count() const noexcept { return rows_ * cols_; }
    std::size_t link_count() const noexcept { return links_.size(); }

    const std::vector<Link>& links() const noexcept { return links_; }
    const Link& link(LinkId id) const;
    /// Outgoing link ids of `spot`, ascending (hence ascending by destination).
    std::span<const LinkId> out_links(SpotId spot) const;
    std::optional<LinkId> link_between(SpotId from, SpotId to) const;

    std::size_t row_of(SpotId s) const noexcept { return s / cols_; }
    std::size_t col_of(SpotId s) const noexcept { return s % cols_; }
    std::size_t manhattan(SpotId a, SpotId b) const noexcept;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<Link> links_;
    std::vector<std::vector<LinkId>> out_;
};

RoadNetwork build_grid(std::size_t rows, std::size_t cols, double link_length_m);

struct Route {
    SpotId origin = 0;
    SpotId destination = 0;
    std::vector<LinkId> links;

    friend bool operator==(const Route&, const Route&) = default;
};

/// Minimal-hop simple paths from origin to destination in lexicographic link-id order,
/// truncated to the first `cap`.
std::vector<Route> enumerate_routes(const RoadNetwork& network, SpotId origin, SpotId destination, std::size_t cap);

/// Throws DataError if `route` is not a connected minimal-hop simple path of `network`.
void validate_route(const RoadNetwork& network, const Route& route);

class RouteDictionary {
public:
    RouteDictionary() = default;
    explicit RouteDictionary(std::size_t spot_count);

    std::size_t spot_count() const noexcept { return spot_count_; }
    /// Number of (origin, destination) entries, n_p * (n_p - 1) when complete.
    std::size_t entry_count() const noexcept;
    std::size_t route_count() const noexcept;
    bool empty() const noexcept { return entry_count() == 0; }

    const std::vector<Route>& routes(SpotId origin, SpotId destination) const;
    void set_routes(SpotId origin, SpotId destination, std::vector<Route> routes);

private:
    std::size_t index(SpotId origin, SpotId destination) const;

    std::size_t spot_count_ = 0;
    std::vector<std::vector<Route>> entries_; // n_p * n_p, diagonal empty
};

RouteDictionary build_route_dictionary(const RoadNetwork& network, std::size_t cap);

struct Trip {
    SpotId origin = 0;
    SpotId destination = 0;
    double depart_time_s = 0.0;
    std::size_t route_index = 0;

    friend bool operator==(const Trip&, const Trip&) = default;
};

struct TripTable {
    std::vector<Trip> trips;
    double period_s = 0.0;

    friend bool operator==(const TripTable&, const TripTable&) = default;
};

/// Per-item random demand intensities over OD pairs.
///
/// Pair weights are drawn from Gamma(concentration) (a Dirichlet after normalisation);
/// `hotspot_fraction` of the pairs, chosen uniformly, are multiplied by `hotspot_boost`.
/// With `uniform` set, every pair has equal weight and the other fields are ignored.
struct DemandProfile {
    double concentration = 1.0;
    double hotspot_fraction = 0.05;
    double hotspot_boost = 10.0;
    bool uniform = false;

    static DemandProfile uniform_profile() { return {1.0, 0.0, 1.0, true}; }
    void validate() const;
};

/// Draws `total_trips` trips; pairs from the demand profile, route uniform within the pair's
/// dictionary entry, departure uniform on [0, period_s).
TripTable sample_demand(const RouteDictionary& dictionary, std::size_t total_trips, double period_s,
                        std::uint64_t seed, const DemandProfile& profile = {});

} // namespace cgame::netgen
