#include "tslab/topogen.hpp"

#include "tslab/error.hpp"
#include "tslab/powerflow.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace tslab {

namespace {

std::vector<std::pair<int, int>> non_adjacent_pairs(const GridCase& base) {
    std::set<std::pair<int, int>> adj;
    for (const Branch& br : base.branches) adj.insert(std::minmax(br.from, br.to));
    std::vector<std::pair<int, int>> out;
    const int n = static_cast<int>(base.bus_count());
    for (int i = 1; i <= n; ++i) {
        for (int j = i + 1; j <= n; ++j) {
            if (!adj.count({i, j})) out.emplace_back(i, j);
        }
    }
    return out;
}

// Draws k distinct elements of `pool` (partial Fisher-Yates on a copy).
template <typename T>
std::vector<T> draw_distinct(std::vector<T> pool, std::size_t k, Rng& rng) {
    for (std::size_t i = 0; i < k; ++i) {
        std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
    }
    pool.resize(k);
    return pool;
}

bool passes_screens(const GridCase& altered) {
    if (!is_connected(altered)) return false;
    return power_flow_feasible(altered);
}

std::string hex_seed(std::uint64_t seed) {
    std::ostringstream os;
    os << std::hex << seed;
    return os.str();
}

}  // namespace

std::vector<std::size_t> removable_branches(const GridCase& base) {
    std::vector<std::size_t> out;
    for (std::size_t l = 0; l < base.branch_count(); ++l) {
        const Branch& br = base.branches[l];
        if (!base.is_generator_bus(br.from) && !base.is_generator_bus(br.to)) out.push_back(l);
    }
    return out;
}

double new_edge_reactance(const GridCase& base, Rng& rng) {
    if (base.branches.empty()) throw InvalidParameter("base case has no branches");
    auto [lo, hi] = std::minmax_element(base.branches.begin(), base.branches.end(),
                                        [](const Branch& a, const Branch& b) { return a.x < b.x; });
    if (lo->x == hi->x) return lo->x;
    // Rounded to the precision of the case file so a reloaded topology is identical.
    return parse_double(format_number(uniform(rng, lo->x, hi->x)));
}

GridCase apply_topology(const GridCase& base, const TopologySpec& spec) {
    GridCase out = remove_branches(base, spec.removed_edges);
    for (const AddedEdge& e : spec.added_edges) out.branches.push_back({e.from, e.to, e.x});
    out.name = spec.id;
    return out;
}

TopologySpec base_topology(const GridCase& base) {
    TopologySpec spec;
    spec.id = base.name;
    spec.base_case_id = base.name;
    spec.kind = TopologyKind::RemoveM;
    spec.m = 0;
    return spec;
}

TopologySpec generate_swap_topology(const GridCase& base, std::uint64_t seed, int max_attempts) {
    const auto candidates = removable_branches(base);
    const auto pairs = non_adjacent_pairs(base);
    if (candidates.size() < 4 || pairs.size() < 4) {
        throw GenerationExhausted("swap4 needs at least 4 removable branches and 4 non-adjacent pairs");
    }
    Rng rng(seed);
    TopologySpec spec;
    spec.base_case_id = base.name;
    spec.kind = TopologyKind::Swap4;
    spec.m = 4;
    spec.seed = seed;
    spec.id = "swap4_" + hex_seed(seed);
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        spec.removed_edges = draw_distinct(candidates, 4, rng);
        std::sort(spec.removed_edges.begin(), spec.removed_edges.end());
        spec.added_edges.clear();
        for (auto [a, b] : draw_distinct(pairs, 4, rng)) {
            spec.added_edges.push_back({a, b, new_edge_reactance(base, rng)});
        }
        spec.attempts = attempt;
        if (passes_screens(apply_topology(base, spec))) return spec;
    }
    throw GenerationExhausted("swap4 generation exhausted after " + std::to_string(max_attempts) +
                              " attempts (seed " + std::to_string(seed) + ")");
}

TopologySpec generate_removal_topology(const GridCase& base, int m, std::uint64_t seed, int max_attempts) {
    if (m < 1 || m > 3) throw InvalidParameter("remove_m requires m in {1,2,3}");
    const auto candidates = removable_branches(base);
    if (candidates.size() < static_cast<std::size_t>(m)) {
        throw GenerationExhausted("not enough removable branches");
    }
    Rng rng(seed);
    TopologySpec spec;
    spec.base_case_id = base.name;
    spec.kind = TopologyKind::RemoveM;
    spec.m = m;
    spec.seed = seed;
    spec.id = "rm" + std::to_string(m) + "_" + hex_seed(seed);
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        spec.removed_edges = draw_distinct(candidates, static_cast<std::size_t>(m), rng);
        std::sort(spec.removed_edges.begin(), spec.removed_edges.end());
        spec.attempts = attempt;
        if (passes_screens(apply_topology(base, spec))) return spec;
    }
    throw GenerationExhausted("remove_m generation exhausted after " + std::to_string(max_attempts) +
                              " attempts (seed " + std::to_string(seed) + ")");
}

std::string kind_name(TopologyKind kind) { return kind == TopologyKind::Swap4 ? "swap4" : "remove_m"; }

TopologyKind parse_kind(std::string_view s) {
    if (s == "swap4") return TopologyKind::Swap4;
    if (s == "remove_m") return TopologyKind::RemoveM;
    throw InvalidInput("unknown topology kind '" + std::string(s) + "'");
}

CaseDocument topology_document(const GridCase& base, const TopologySpec& spec) {
    CaseDocument doc{apply_topology(base, spec), {}};
    auto& p = doc.provenance;
    p.emplace_back("topology_id", spec.id);
    p.emplace_back("base_case", spec.base_case_id);
    p.emplace_back("kind", kind_name(spec.kind));
    p.emplace_back("m", std::to_string(spec.m));
    p.emplace_back("seed", std::to_string(spec.seed));
    p.emplace_back("attempts", std::to_string(spec.attempts));
    std::string removed;
    for (std::size_t e : spec.removed_edges) {
        if (!removed.empty()) removed += ' ';
        removed += std::to_string(e);
    }
    p.emplace_back("removed_branch_indices", removed.empty() ? "-" : removed);
    std::string added;
    for (const AddedEdge& e : spec.added_edges) {
        if (!added.empty()) added += ' ';
        added += std::to_string(e.from) + ':' + std::to_string(e.to) + ':' + format_number(e.x);
    }
    p.emplace_back("added_branches", added.empty() ? "-" : added);
    return doc;
}

TopologySpec topology_from_document(const CaseDocument& doc) {
    auto get = [&](std::string_view key) -> const std::string& {
        const std::string* v = find_value(doc.provenance, key);
        if (!v) throw InvalidInput("topology file lacks provenance key '" + std::string(key) + "'");
        return *v;
    };
    TopologySpec spec;
    spec.id = get("topology_id");
    spec.base_case_id = get("base_case");
    spec.kind = parse_kind(get("kind"));
    spec.m = static_cast<int>(parse_int(get("m")));
    spec.seed = std::stoull(get("seed"));
    spec.attempts = static_cast<int>(parse_int(get("attempts")));
    const std::string& removed = get("removed_branch_indices");
    if (removed != "-") {
        for (auto tok : split_ws(removed)) spec.removed_edges.push_back(static_cast<std::size_t>(parse_int(tok)));
    }
    const std::string& added = get("added_branches");
    if (added != "-") {
        for (auto tok : split_ws(added)) {
            const auto c1 = tok.find(':');
            const auto c2 = tok.find(':', c1 + 1);
            if (c1 == std::string_view::npos || c2 == std::string_view::npos) {
                throw InvalidInput("bad added branch '" + std::string(tok) + "'");
            }
            spec.added_edges.push_back({static_cast<int>(parse_int(tok.substr(0, c1))),
                                        static_cast<int>(parse_int(tok.substr(c1 + 1, c2 - c1 - 1))),
                                        parse_double(tok.substr(c2 + 1))});
        }
    }
    return spec;
}

}  // namespace tslab
