#include "test_util.hpp"

#include "tslab/case39.hpp"
#include "tslab/error.hpp"
#include "tslab/powerflow.hpp"
#include "tslab/topogen.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace tslab;
using namespace tslab::testing;

namespace {

std::set<std::pair<int, int>> edge_set(const GridCase& g) {
    std::set<std::pair<int, int>> s;
    for (const auto& b : g.branches) s.insert({std::min(b.from, b.to), std::max(b.from, b.to)});
    return s;
}

/// Two triangles joined by the bridge 3-4; the generator sits on bus 1.
GridCase bowtie() {
    GridCase g = bare_case(6);
    g.branches = {{1, 2, 0.1}, {2, 3, 0.1}, {1, 3, 0.1}, {3, 4, 0.1}, {4, 5, 0.1}, {5, 6, 0.1}, {4, 6, 0.1}};
    g.buses[5].p_load = 0.1;
    return g;
}

}  // namespace

TEST_CASE("swap4 invariants on the 39-bus case") {
    const GridCase base = load_case("ieee39");
    const auto base_edges = edge_set(base);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const TopologySpec spec = generate_swap_topology(base, seed);
        CHECK(spec.kind == TopologyKind::Swap4);
        REQUIRE(spec.removed_edges.size() == 4);
        REQUIRE(spec.added_edges.size() == 4);
        CHECK(std::is_sorted(spec.removed_edges.begin(), spec.removed_edges.end()));
        const auto eligible = removable_branches(base);
        for (auto e : spec.removed_edges) CHECK(std::count(eligible.begin(), eligible.end(), e) == 1);
        for (const auto& a : spec.added_edges) {
            CHECK(base_edges.count({std::min(a.from, a.to), std::max(a.from, a.to)}) == 0);
            CHECK(a.from != a.to);
        }
        const GridCase g = apply_topology(base, spec);
        CHECK(g.bus_count() == base.bus_count());
        CHECK(g.branch_count() == base.branch_count());
        CHECK(edge_set(g).size() == g.branch_count());
        CHECK(is_connected(g));
        CHECK(power_flow_feasible(g));
        CHECK(spec == generate_swap_topology(base, seed));
    }
}

TEST_CASE("swap4 needs four removable edges") {
    CHECK_THROWS_AS(generate_swap_topology(triangle_case(), 1), GenerationExhausted);
}

TEST_CASE("removal topologies") {
    const GridCase base = load_case("ieee39");
    for (int m : {1, 2, 3}) {
        const TopologySpec spec = generate_removal_topology(base, m, 5);
        CHECK(spec.removed_edges.size() == static_cast<std::size_t>(m));
        CHECK(spec.added_edges.empty());
        const GridCase g = apply_topology(base, spec);
        CHECK(g.branch_count() == 46 - static_cast<std::size_t>(m));
        CHECK(is_connected(g));
        CHECK(spec == generate_removal_topology(base, m, 5));
    }
    CHECK_THROWS_AS(generate_removal_topology(base, 0, 1), InvalidParameter);
    CHECK_THROWS_AS(generate_removal_topology(base, 4, 1), InvalidParameter);
}

TEST_CASE("bridge removal is rejected") {
    const GridCase g = bowtie();
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const TopologySpec spec = generate_removal_topology(g, 1, seed);
        REQUIRE(spec.removed_edges.size() == 1);
        CHECK(spec.removed_edges[0] != 3);
    }
    // A path is all bridges.
    GridCase path = path_case(6, 0.1);
    CHECK_THROWS_AS(generate_removal_topology(path, 1, 1, 200), GenerationExhausted);
}

TEST_CASE("generator-incident edges are never removal candidates") {
    const GridCase base = load_case("ieee39");
    const auto eligible = removable_branches(base);
    CHECK(eligible.size() == 46 - 11);
    for (auto e : eligible) {
        CHECK_FALSE(base.is_generator_bus(base.branches[e].from));
        CHECK_FALSE(base.is_generator_bus(base.branches[e].to));
    }
}

TEST_CASE("new edge reactance follows the base range") {
    const GridCase base = load_case("ieee39");
    double lo = 1e9, hi = 0.0;
    for (const auto& b : base.branches) {
        lo = std::min(lo, b.x);
        hi = std::max(hi, b.x);
    }
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double x = new_edge_reactance(base, rng);
        CHECK(x >= lo);
        CHECK(x <= hi);
    }
    Rng a(9), b(9);
    CHECK(new_edge_reactance(base, a) == new_edge_reactance(base, b));

    GridCase flat = path_case(4, 0.02);
    Rng r(1);
    CHECK(new_edge_reactance(flat, r) == 0.02);
}

TEST_CASE("distinct seeds give distinct swaps") {
    const GridCase base = load_case("ieee39");
    std::set<std::pair<std::vector<std::size_t>, std::vector<std::pair<int, int>>>> seen;
    for (std::uint64_t seed = 1000; seed < 1100; ++seed) {
        const TopologySpec s = generate_swap_topology(base, seed);
        std::vector<std::pair<int, int>> added;
        for (const auto& a : s.added_edges) added.push_back({a.from, a.to});
        seen.insert({s.removed_edges, added});
    }
    CHECK(seen.size() >= 99);
}

TEST_CASE("topology document round trip") {
    const GridCase base = load_case("ieee39");
    const TopologySpec spec = generate_swap_topology(base, 21);
    const CaseDocument doc = topology_document(base, spec);
    const CaseDocument back = parse_case(format_case(doc));
    CHECK(topology_from_document(back) == spec);
    CHECK(format_case(back.grid) == format_case(apply_topology(base, spec)));
    CHECK(parse_kind(kind_name(TopologyKind::RemoveM)) == TopologyKind::RemoveM);
    CHECK_THROWS_AS(parse_kind("swap5"), InvalidInput);

    const TopologySpec id = base_topology(base);
    CHECK(id.removed_edges.empty());
    CHECK(apply_topology(base, id).branches.size() == base.branches.size());
}
