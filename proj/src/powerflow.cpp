#include "tslab/powerflow.hpp"

#include "tslab/error.hpp"
#include "tslab/rng.hpp"

#include <Eigen/LU>

#include <cmath>

namespace tslab {

namespace {

struct Adjacency {
    // (neighbor index, admittance 1/x) per bus
    std::vector<std::vector<std::pair<int, double>>> nb;
};

Adjacency make_adjacency(const GridCase& grid) {
    Adjacency a;
    a.nb.resize(grid.bus_count());
    for (const Branch& br : grid.branches) {
        const double y = 1.0 / br.x;
        a.nb[static_cast<std::size_t>(br.from - 1)].emplace_back(br.to - 1, y);
        a.nb[static_cast<std::size_t>(br.to - 1)].emplace_back(br.from - 1, y);
    }
    return a;
}

double scale_at(std::span<const double> s, std::size_t i) { return s.empty() ? 1.0 : s[i]; }

// Scheduled net injections (generation setpoint - scaled load).
void scheduled(const GridCase& grid, std::span<const double> load_scale, std::vector<double>& p,
               std::vector<double>& q) {
    const std::size_t n = grid.bus_count();
    p.assign(n, 0.0);
    q.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = -grid.buses[i].p_load * scale_at(load_scale, i);
        q[i] = -grid.buses[i].q_load * scale_at(load_scale, i);
    }
    for (const Generator& g : grid.generators) p[static_cast<std::size_t>(g.bus - 1)] += g.p_mech;
}

void injections(const Adjacency& adj, std::span<const double> theta, std::span<const double> v,
                std::vector<double>& p, std::vector<double>& q) {
    const std::size_t n = theta.size();
    p.assign(n, 0.0);
    q.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto [j, y] : adj.nb[i]) {
            const double d = theta[i] - theta[static_cast<std::size_t>(j)];
            const double vv = v[i] * v[static_cast<std::size_t>(j)] * y;
            p[i] += vv * std::sin(d);
            q[i] += v[i] * v[i] * y - vv * std::cos(d);
        }
    }
}

void check_scale(const GridCase& grid, std::span<const double> load_scale) {
    if (load_scale.empty()) return;
    if (load_scale.size() != grid.bus_count()) throw InvalidParameter("load_scale length mismatch");
    for (double s : load_scale) {
        if (!(s > 0.0 && s <= 2.0)) throw InvalidParameter("load scale factors must lie in (0, 2]");
    }
}

}  // namespace

PowerFlowSolution solve_power_flow(const GridCase& grid, std::span<const double> load_scale,
                                   const PowerFlowOptions& options) {
    validate_structure(grid);
    check_scale(grid, load_scale);
    const std::size_t n = grid.bus_count();
    const Adjacency adj = make_adjacency(grid);

    std::vector<double> p_spec, q_spec;
    scheduled(grid, load_scale, p_spec, q_spec);

    // Unknown layout: theta at every non-slack bus, then V at every PQ bus.
    std::vector<int> theta_col(n, -1), v_col(n, -1);
    int cols = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (grid.buses[i].type != BusType::Slack) theta_col[i] = cols++;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (grid.buses[i].type == BusType::PQ) v_col[i] = cols++;
    }

    PowerFlowSolution sol;
    sol.theta.assign(n, 0.0);
    sol.vmag.assign(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (grid.buses[i].type != BusType::PQ) sol.vmag[i] = grid.buses[i].v_set;
    }

    std::vector<double> p, q;
    Eigen::VectorXd mismatch(cols);
    Eigen::MatrixXd jac(cols, cols);
    for (int iter = 0;; ++iter) {
        injections(adj, sol.theta, sol.vmag, p, q);
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (theta_col[i] >= 0) mismatch(theta_col[i]) = p_spec[i] - p[i];
            if (v_col[i] >= 0) mismatch(v_col[i]) = q_spec[i] - q[i];
        }
        worst = cols > 0 ? mismatch.cwiseAbs().maxCoeff() : 0.0;
        sol.iterations = iter;
        sol.max_mismatch = worst;
        if (!std::isfinite(worst)) break;
        if (worst < options.tolerance) {
            sol.converged = true;
            break;
        }
        if (iter >= options.max_iterations) break;

        jac.setZero();
        for (std::size_t i = 0; i < n; ++i) {
            const int ri_p = theta_col[i];
            const int ri_q = v_col[i];
            const double vi = sol.vmag[i];
            for (auto [jj, y] : adj.nb[i]) {
                const auto j = static_cast<std::size_t>(jj);
                const double d = sol.theta[i] - sol.theta[j];
                const double c = std::cos(d), s = std::sin(d);
                const double vj = sol.vmag[j];
                if (ri_p >= 0) {
                    if (theta_col[i] >= 0) jac(ri_p, theta_col[i]) += vi * vj * y * c;
                    if (theta_col[j] >= 0) jac(ri_p, theta_col[j]) -= vi * vj * y * c;
                    if (v_col[i] >= 0) jac(ri_p, v_col[i]) += vj * y * s;
                    if (v_col[j] >= 0) jac(ri_p, v_col[j]) += vi * y * s;
                }
                if (ri_q >= 0) {
                    if (theta_col[i] >= 0) jac(ri_q, theta_col[i]) += vi * vj * y * s;
                    if (theta_col[j] >= 0) jac(ri_q, theta_col[j]) -= vi * vj * y * s;
                    if (v_col[i] >= 0) jac(ri_q, v_col[i]) += 2.0 * vi * y - vj * y * c;
                    if (v_col[j] >= 0) jac(ri_q, v_col[j]) -= vi * y * c;
                }
            }
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
        if (!lu.isInvertible()) throw NumericalError("singular power-flow Jacobian");
        const Eigen::VectorXd dx = lu.solve(mismatch);
        for (std::size_t i = 0; i < n; ++i) {
            if (theta_col[i] >= 0) sol.theta[i] += dx(theta_col[i]);
            if (v_col[i] >= 0) sol.vmag[i] += dx(v_col[i]);
        }
    }

    injections(adj, sol.theta, sol.vmag, sol.p_inj, sol.q_inj);
    return sol;
}

std::vector<double> scale_loads(const GridCase& grid, double low, double high, std::uint64_t seed) {
    if (!(low > 0.0) || !(low <= high)) throw InvalidParameter("scale_loads requires 0 < low <= high");
    Rng rng(seed);
    std::vector<double> s(grid.bus_count(), 1.0);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const Bus& b = grid.buses[i];
        if (b.p_load != 0.0 || b.q_load != 0.0) s[i] = uniform(rng, low, high);
    }
    return s;
}

GridCase apply_load_scale(const GridCase& grid, std::span<const double> load_scale) {
    check_scale(grid, load_scale);
    GridCase out = grid;
    for (std::size_t i = 0; i < out.bus_count(); ++i) {
        out.buses[i].p_load *= scale_at(load_scale, i);
        out.buses[i].q_load *= scale_at(load_scale, i);
    }
    return out;
}

std::vector<double> power_flow_residuals(const GridCase& grid, std::span<const double> load_scale,
                                         std::span<const double> theta, std::span<const double> vmag) {
    const std::size_t n = grid.bus_count();
    std::vector<double> p_spec, q_spec;
    scheduled(grid, load_scale, p_spec, q_spec);
    std::vector<double> out;
    for (std::size_t i = 0; i < n; ++i) {
        const BusType t = grid.buses[i].type;
        double p = 0.0, q = 0.0;
        for (const Branch& br : grid.branches) {
            std::size_t j;
            if (static_cast<std::size_t>(br.from - 1) == i) {
                j = static_cast<std::size_t>(br.to - 1);
            } else if (static_cast<std::size_t>(br.to - 1) == i) {
                j = static_cast<std::size_t>(br.from - 1);
            } else {
                continue;
            }
            const double y = 1.0 / br.x;
            p += vmag[i] * vmag[j] * y * std::sin(theta[i] - theta[j]);
            q += vmag[i] * vmag[i] * y - vmag[i] * vmag[j] * y * std::cos(theta[i] - theta[j]);
        }
        if (t != BusType::Slack) out.push_back(p_spec[i] - p);
        if (t == BusType::PQ) out.push_back(q_spec[i] - q);
    }
    return out;
}

bool branch_angles_within(const GridCase& grid, const PowerFlowSolution& sol, double limit) {
    for (const Branch& br : grid.branches) {
        const double d = sol.theta[static_cast<std::size_t>(br.from - 1)] - sol.theta[static_cast<std::size_t>(br.to - 1)];
        if (!(std::abs(d) < limit)) return false;
    }
    return true;
}

bool power_flow_feasible(const GridCase& grid, std::span<const double> load_scale) {
    if (!is_connected(grid)) return false;
    PowerFlowSolution sol;
    try {
        sol = solve_power_flow(grid, load_scale);
    } catch (const NumericalError&) {
        return false;
    }
    if (!sol.converged) return false;
    for (double v : sol.vmag) {
        if (!(v > 0.0)) return false;
    }
    return branch_angles_within(grid, sol);
}

std::vector<double> generator_p(const GridCase& grid, std::span<const double> load_scale,
                                const PowerFlowSolution& sol) {
    std::vector<double> out;
    out.reserve(grid.generators.size());
    for (const Generator& g : grid.generators) {
        const auto i = static_cast<std::size_t>(g.bus - 1);
        out.push_back(sol.p_inj[i] + grid.buses[i].p_load * scale_at(load_scale, i));
    }
    return out;
}

std::vector<double> generator_q(const GridCase& grid, std::span<const double> load_scale,
                                const PowerFlowSolution& sol) {
    std::vector<double> out;
    out.reserve(grid.generators.size());
    for (const Generator& g : grid.generators) {
        const auto i = static_cast<std::size_t>(g.bus - 1);
        out.push_back(sol.q_inj[i] + grid.buses[i].q_load * scale_at(load_scale, i));
    }
    return out;
}

}  // namespace tslab
