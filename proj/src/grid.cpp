#include "tslab/grid.hpp"

#include "tslab/error.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <utility>

namespace tslab {

int GridCase::generator_at(int bus_id) const {
    for (std::size_t g = 0; g < generators.size(); ++g) {
        if (generators[g].bus == bus_id) return static_cast<int>(g);
    }
    return -1;
}

int GridCase::slack_bus() const {
    for (const auto& b : buses) {
        if (b.type == BusType::Slack) return b.id;
    }
    throw InvalidCase("case '" + name + "' has no slack bus");
}

void validate_structure(const GridCase& grid) {
    const int n = static_cast<int>(grid.buses.size());
    if (n < 2) throw InvalidCase("case needs at least two buses");
    int slack = 0;
    for (int i = 0; i < n; ++i) {
        const Bus& b = grid.buses[i];
        if (b.id != i + 1) {
            throw InvalidCase("bus ids must be 1..n in order; found " + std::to_string(b.id) +
                              " at position " + std::to_string(i + 1));
        }
        if (!(b.v_set > 0.0)) throw InvalidCase("bus " + std::to_string(b.id) + ": v_set must be > 0");
        if (b.type == BusType::Slack) ++slack;
    }
    if (slack != 1) throw InvalidCase("exactly one slack bus required, found " + std::to_string(slack));

    std::set<std::pair<int, int>> seen;
    for (const Branch& br : grid.branches) {
        if (br.from < 1 || br.from > n || br.to < 1 || br.to > n) {
            throw InvalidCase("branch references unknown bus");
        }
        if (br.from == br.to) throw InvalidCase("self-loop branch at bus " + std::to_string(br.from));
        if (!(br.x > 0.0)) {
            throw InvalidCase("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                              " has nonpositive reactance");
        }
        auto key = std::minmax(br.from, br.to);
        if (!seen.insert(key).second) {
            throw InvalidCase("duplicate branch " + std::to_string(key.first) + "-" +
                              std::to_string(key.second));
        }
    }

    std::vector<int> gens_at(n + 1, 0);
    for (const Generator& g : grid.generators) {
        if (g.bus < 1 || g.bus > n) throw InvalidCase("generator at unknown bus " + std::to_string(g.bus));
        if (++gens_at[g.bus] > 1) throw InvalidCase("more than one generator at bus " + std::to_string(g.bus));
        if (!(g.inertia > 0.0) || !(g.xd_prime > 0.0) || g.damping < 0.0) {
            throw InvalidCase("generator at bus " + std::to_string(g.bus) + " has invalid dynamic data");
        }
        if (grid.buses[g.bus - 1].type == BusType::PQ) {
            throw InvalidCase("generator at PQ bus " + std::to_string(g.bus));
        }
    }
    for (const Bus& b : grid.buses) {
        if (b.type != BusType::PQ && gens_at[b.id] == 0) {
            throw InvalidCase("voltage-controlled bus " + std::to_string(b.id) + " has no generator");
        }
    }
}

void GridCase::validate() const {
    validate_structure(*this);
    if (!is_connected(*this)) throw InvalidCase("case '" + name + "' is not connected");
}

Eigen::MatrixXd build_incidence(const GridCase& grid) {
    validate_structure(grid);
    const auto n = static_cast<Eigen::Index>(grid.bus_count());
    const auto m = static_cast<Eigen::Index>(grid.branch_count());
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, m);
    for (Eigen::Index l = 0; l < m; ++l) {
        const Branch& br = grid.branches[static_cast<std::size_t>(l)];
        b(br.from - 1, l) = -1.0;
        b(br.to - 1, l) = 1.0;
    }
    return b;
}

NetworkMatrices build_laplacian(const GridCase& grid, std::span<const double> voltages) {
    if (voltages.size() != grid.bus_count()) {
        throw InvalidParameter("voltage vector length does not match bus count");
    }
    for (double v : voltages) {
        if (!(v > 0.0) || !std::isfinite(v)) throw InvalidParameter("voltage magnitudes must be positive");
    }
    NetworkMatrices out;
    out.incidence = build_incidence(grid);
    out.weights.resize(static_cast<Eigen::Index>(grid.branch_count()));
    for (std::size_t l = 0; l < grid.branch_count(); ++l) {
        const Branch& br = grid.branches[l];
        out.weights(static_cast<Eigen::Index>(l)) =
            voltages[static_cast<std::size_t>(br.from - 1)] * voltages[static_cast<std::size_t>(br.to - 1)] / br.x;
    }
    out.laplacian = out.incidence * out.weights.asDiagonal() * out.incidence.transpose();
    out.pinv = pseudo_inverse(out.laplacian, kPinvRelTol, &out.rank);
    return out;
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& a, double rel_tol, int* rank) {
    if (a.rows() != a.cols()) throw InvalidParameter("pseudo_inverse expects a square matrix");
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw InvalidParameter("pseudo_inverse expects a symmetric matrix");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");

    const Eigen::VectorXd& lambda = es.eigenvalues();
    const double lambda_max = lambda.cwiseAbs().maxCoeff();
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(lambda.size());
    int r = 0;
    if (lambda_max > 0.0) {
        for (Eigen::Index i = 0; i < lambda.size(); ++i) {
            if (std::abs(lambda(i)) > rel_tol * lambda_max) {
                inv(i) = 1.0 / lambda(i);
                ++r;
            }
        }
    }
    if (rank) *rank = r;
    const Eigen::MatrixXd& v = es.eigenvectors();
    return v * inv.asDiagonal() * v.transpose();
}

bool is_connected(const GridCase& grid, std::span<const std::size_t> removed_edges) {
    const std::size_t n = grid.bus_count();
    if (n == 0) return true;
    std::vector<char> removed(grid.branch_count(), 0);
    for (std::size_t e : removed_edges) {
        if (e < removed.size()) removed[e] = 1;
    }
    std::vector<std::vector<int>> adj(n);
    for (std::size_t l = 0; l < grid.branch_count(); ++l) {
        if (removed[l]) continue;
        const Branch& br = grid.branches[l];
        adj[static_cast<std::size_t>(br.from - 1)].push_back(br.to - 1);
        adj[static_cast<std::size_t>(br.to - 1)].push_back(br.from - 1);
    }
    std::vector<char> seen(n, 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    std::size_t reached = 1;
    while (!q.empty()) {
        const int u = q.front();
        q.pop();
        for (int v : adj[static_cast<std::size_t>(u)]) {
            if (!seen[static_cast<std::size_t>(v)]) {
                seen[static_cast<std::size_t>(v)] = 1;
                ++reached;
                q.push(v);
            }
        }
    }
    return reached == n;
}

GridCase remove_branches(const GridCase& grid, std::span<const std::size_t> removed_edges) {
    std::vector<char> removed(grid.branch_count(), 0);
    for (std::size_t e : removed_edges) {
        if (e >= removed.size()) throw InvalidParameter("branch index out of range");
        removed[e] = 1;
    }
    GridCase out = grid;
    out.branches.clear();
    for (std::size_t l = 0; l < grid.branch_count(); ++l) {
        if (!removed[l]) out.branches.push_back(grid.branches[l]);
    }
    return out;
}

GridCase permute_buses(const GridCase& grid, std::span<const int> new_id) {
    const std::size_t n = grid.bus_count();
    if (new_id.size() != n) throw InvalidParameter("permutation length does not match bus count");
    std::vector<char> hit(n, 0);
    for (int id : new_id) {
        if (id < 1 || static_cast<std::size_t>(id) > n || hit[static_cast<std::size_t>(id - 1)]) {
            throw InvalidParameter("not a permutation of bus ids");
        }
        hit[static_cast<std::size_t>(id - 1)] = 1;
    }
    auto map = [&](int old) { return new_id[static_cast<std::size_t>(old - 1)]; };

    GridCase out = grid;
    for (std::size_t i = 0; i < n; ++i) {
        Bus b = grid.buses[i];
        b.id = map(b.id);
        out.buses[static_cast<std::size_t>(b.id - 1)] = b;
    }
    for (auto& br : out.branches) {
        br.from = map(br.from);
        br.to = map(br.to);
    }
    for (auto& g : out.generators) g.bus = map(g.bus);
    std::stable_sort(out.generators.begin(), out.generators.end(),
                     [](const Generator& a, const Generator& b) { return a.bus < b.bus; });
    return out;
}

Eigen::MatrixXd permutation_matrix(std::span<const int> new_id) {
    const auto n = static_cast<Eigen::Index>(new_id.size());
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index old = 0; old < n; ++old) p(new_id[static_cast<std::size_t>(old)] - 1, old) = 1.0;
    return p;
}

}  // namespace tslab
