#pragma once

#include "tslab/case_io.hpp"
#include "tslab/grid.hpp"
#include "tslab/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tslab {

enum class TopologyKind { Swap4, RemoveM };

struct AddedEdge {
    int from = 0;
    int to = 0;
    double x = 0.0;
};

struct TopologySpec {
    std::string id;
    std::string base_case_id;
    TopologyKind kind = TopologyKind::Swap4;
    int m = 0;  ///< edges removed (4 for swap4)
    std::vector<std::size_t> removed_edges;  ///< 0-based indices into base branches, ascending
    std::vector<AddedEdge> added_edges;
    std::uint64_t seed = 0;
    int attempts = 0;  ///< candidates drawn before acceptance

    bool operator==(const TopologySpec&) const = default;
};

inline bool operator==(const AddedEdge& a, const AddedEdge& b) {
    return a.from == b.from && a.to == b.to && a.x == b.x;
}

inline constexpr int kMaxTopologyAttempts = 10000;

/// Branches eligible for removal: not incident to any generator bus.
std::vector<std::size_t> removable_branches(const GridCase& base);

/// Reactance for a new line, uniform over the base case's [min x, max x].
double new_edge_reactance(const GridCase& base, Rng& rng);

/// Remove 4 / add 4 random edges until the altered grid is connected and has
/// a feasible power flow. Throws GenerationExhausted after `max_attempts`
/// rejections (or immediately when fewer than 4 candidates exist).
TopologySpec generate_swap_topology(const GridCase& base, std::uint64_t seed,
                                    int max_attempts = kMaxTopologyAttempts);

/// Remove m in {1,2,3} random edges subject to the same two screens.
TopologySpec generate_removal_topology(const GridCase& base, int m, std::uint64_t seed,
                                       int max_attempts = kMaxTopologyAttempts);

/// The altered grid: base minus removed branches, plus added branches
/// appended in order. The grid name becomes the spec id.
GridCase apply_topology(const GridCase& base, const TopologySpec& spec);

/// Identity topology (nothing removed or added) for using a base case directly.
TopologySpec base_topology(const GridCase& base);

std::string kind_name(TopologyKind kind);
TopologyKind parse_kind(std::string_view s);

/// Altered grid plus a provenance section describing the spec.
CaseDocument topology_document(const GridCase& base, const TopologySpec& spec);
/// Recovers the spec from a document written by topology_document.
TopologySpec topology_from_document(const CaseDocument& doc);

}  // namespace tslab
