#include "cgame/error.hpp"
#include "cgame/netgen.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

using namespace cgame;
using namespace cgame::netgen;

TEST_CASE("build_grid link and spot counts") {
    CHECK(build_grid(6, 6, 2000).spot_count() == 36);
    CHECK(build_grid(6, 6, 2000).link_count() == 120);
    CHECK(build_grid(2, 2, 2000).link_count() == 8);
    const auto g = build_grid(3, 3, 2000);
    CHECK(g.spot_count() == 9);
    CHECK(g.link_count() == 2 * (3 * 2 + 3 * 2));
    CHECK(build_grid(3, 4, 10).link_count() == 2 * (3 * 3 + 4 * 2));
}

TEST_CASE("build_grid invariants: adjacency, reverse links, ordering") {
    const auto g = build_grid(4, 5, 150.0);
    std::set<std::pair<SpotId, SpotId>> edges;
    for (std::size_t i = 0; i < g.links().size(); ++i) {
        const auto& l = g.links()[i];
        CHECK(l.id == i);
        CHECK(g.manhattan(l.from, l.to) == 1);
        CHECK(l.length_m == 150.0);
        if (i > 0) {
            const auto& prev = g.links()[i - 1];
            CHECK(std::make_pair(prev.from, prev.to) < std::make_pair(l.from, l.to));
        }
        edges.insert({l.from, l.to});
    }
    for (const auto& [a, b] : edges) CHECK(edges.count({b, a}) == 1);
}

TEST_CASE("build_grid rejects degenerate configs") {
    CHECK_THROWS_AS(build_grid(1, 5, 100), ConfigError);
    CHECK_THROWS_AS(build_grid(5, 1, 100), ConfigError);
    CHECK_THROWS_AS(build_grid(3, 3, 0.0), ConfigError);
    try {
        build_grid(1, 3, 100);
    } catch (const ConfigError& e) {
        CHECK(e.field() == "network.rows");
    }
}

TEST_CASE("enumerate_routes on a 2x2 grid") {
    const auto g = build_grid(2, 2, 2000);
    const auto routes = enumerate_routes(g, 0, 3, 10);
    REQUIRE(routes.size() == 2);
    // right-then-down is (0->1)(1->3); down-then-right is (0->2)(2->3)
    CHECK(routes[0].links == std::vector<LinkId>{*g.link_between(0, 1), *g.link_between(1, 3)});
    CHECK(routes[1].links == std::vector<LinkId>{*g.link_between(0, 2), *g.link_between(2, 3)});
    const auto adjacent = enumerate_routes(g, 0, 1, 10);
    REQUIRE(adjacent.size() == 1);
    CHECK(adjacent[0].links.size() == 1);
}

TEST_CASE("enumerate_routes corner to corner on 3x3 and cap") {
    const auto g = build_grid(3, 3, 2000);
    CHECK(enumerate_routes(g, 0, 8, 10).size() == 6);
    const auto capped = enumerate_routes(g, 0, 8, 4);
    REQUIRE(capped.size() == 4);
    const auto full = enumerate_routes(g, 0, 8, 100);
    for (std::size_t i = 0; i < 4; ++i) CHECK(capped[i] == full[i]);
    CHECK(std::is_sorted(full.begin(), full.end(), [](const Route& a, const Route& b) { return a.links < b.links; }));
}

TEST_CASE("enumerate_routes errors") {
    const auto g = build_grid(2, 3, 100);
    CHECK_THROWS_AS(enumerate_routes(g, 2, 2, 5), ConfigError);
    CHECK_THROWS_AS(enumerate_routes(g, 0, 1, 0), ConfigError);
    CHECK_THROWS_AS(enumerate_routes(g, 0, 99, 1), IndexError);
}

TEST_CASE("enumerate_routes equals brute-force DFS on small grids") {
    for (std::size_t rows = 2; rows <= 3; ++rows) {
        for (std::size_t cols = 2; cols <= 3; ++cols) {
            const auto g = build_grid(rows, cols, 1.0);
            for (SpotId o = 0; o < g.spot_count(); ++o) {
                for (SpotId d = 0; d < g.spot_count(); ++d) {
                    if (o == d) continue;
                    const auto routes = enumerate_routes(g, o, d, 1000);
                    std::vector<std::vector<LinkId>> got;
                    for (const auto& r : routes) {
                        validate_route(g, r);
                        got.push_back(r.links);
                    }
                    CHECK(got == oracle::all_shortest_simple_paths(g, o, d));
                }
            }
        }
    }
}

TEST_CASE("build_route_dictionary on 2x2 grid") {
    const auto g = build_grid(2, 2, 2000);
    const auto dict = build_route_dictionary(g, 10);
    CHECK(dict.entry_count() == 12);
    CHECK(dict.route_count() == 16);
    std::size_t singles = 0, doubles = 0;
    for (SpotId o = 0; o < 4; ++o)
        for (SpotId d = 0; d < 4; ++d) {
            if (o == d) continue;
            const auto n = dict.routes(o, d).size();
            singles += n == 1;
            doubles += n == 2;
        }
    CHECK(singles == 8);
    CHECK(doubles == 4);
}

TEST_CASE("build_route_dictionary entry count and cap on 6x6") {
    const auto g = build_grid(6, 6, 2000);
    const auto dict = build_route_dictionary(g, 20);
    CHECK(dict.entry_count() == 36 * 35);
    for (SpotId o = 0; o < 36; ++o)
        for (SpotId d = 0; d < 36; ++d)
            if (o != d) {
                const auto& routes = dict.routes(o, d);
                CHECK(!routes.empty());
                CHECK(routes.size() <= 20);
                CHECK(std::set<Route, decltype([](const Route& a, const Route& b) { return a.links < b.links; })>(
                          routes.begin(), routes.end())
                          .size() == routes.size());
            }
    CHECK(build_route_dictionary(build_grid(3, 4, 1), 5).entry_count() == 12 * 11);
}

TEST_CASE("sample_demand basics") {
    const auto dict = build_route_dictionary(build_grid(3, 3, 2000), 50);
    CHECK(sample_demand(dict, 0, 3600, 1).trips.empty());
    CHECK(sample_demand(dict, 500, 3600, 42) == sample_demand(dict, 500, 3600, 42));
    CHECK(sample_demand(dict, 500, 3600, 42) != sample_demand(dict, 500, 3600, 43));
    CHECK_THROWS_AS(sample_demand(RouteDictionary(4), 10, 3600, 1), ConfigError);

    const auto table = sample_demand(dict, 2000, 900.0, 5);
    CHECK(table.period_s == 900.0);
    for (const auto& t : table.trips) {
        CHECK(t.depart_time_s >= 0.0);
        CHECK(t.depart_time_s < 900.0);
        CHECK(t.origin != t.destination);
        CHECK(t.route_index < dict.routes(t.origin, t.destination).size());
    }
}

TEST_CASE("sample_demand with a uniform profile matches multinomial expectations") {
    const auto dict = build_route_dictionary(build_grid(3, 3, 2000), 50);
    const std::size_t n = 10000;
    const auto table = sample_demand(dict, n, 3600, 2024, DemandProfile::uniform_profile());
    std::map<std::pair<SpotId, SpotId>, double> counts;
    for (const auto& t : table.trips) counts[{t.origin, t.destination}] += 1.0;

    const double pairs = 72.0;
    const double p = 1.0 / pairs;
    const double expect = n * p;
    const double sigma = std::sqrt(n * p * (1 - p));
    double chi2 = 0.0;
    for (SpotId o = 0; o < 9; ++o)
        for (SpotId d = 0; d < 9; ++d) {
            if (o == d) continue;
            const double c = counts[{o, d}];
            CHECK(std::abs(c - expect) <= 5 * sigma);
            chi2 += (c - expect) * (c - expect) / expect;
        }
    const double df = pairs - 1;
    CHECK(chi2 < df + 5 * std::sqrt(2 * df));
}

TEST_CASE("sample_demand hotspot profile concentrates demand") {
    const auto dict = build_route_dictionary(build_grid(3, 3, 2000), 50);
    DemandProfile profile;
    profile.hotspot_fraction = 0.05;
    profile.hotspot_boost = 10.0;
    const auto table = sample_demand(dict, 20000, 3600, 9, profile);
    std::map<std::pair<SpotId, SpotId>, double> counts;
    for (const auto& t : table.trips) counts[{t.origin, t.destination}] += 1.0;
    double max = 0.0;
    for (const auto& [_, c] : counts) max = std::max(max, c);
    CHECK(max > 5.0 * 20000.0 / 72.0);

    DemandProfile bad;
    bad.concentration = 0.0;
    CHECK_THROWS_AS(sample_demand(dict, 10, 3600, 1, bad), ConfigError);
}
