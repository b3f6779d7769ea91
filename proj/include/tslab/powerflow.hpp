#pragma once

#include "tslab/grid.hpp"

#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace tslab {

struct PowerFlowSolution {
    std::vector<double> theta;  ///< rad, slack = 0
    std::vector<double> vmag;   ///< p.u.
    std::vector<double> p_inj;  ///< net injection (generation - load), p.u.
    std::vector<double> q_inj;
    bool converged = false;
    int iterations = 0;
    double max_mismatch = 0.0;
};

struct PowerFlowOptions {
    int max_iterations = 50;
    double tolerance = 1e-8;
};

/// Lossless Newton-Raphson power flow from a flat start.
///
/// Injections: P_i = sum_j V_i V_j y_ij sin(theta_i - theta_j) and
/// Q_i = V_i^2 sum_j y_ij - sum_j V_i V_j y_ij cos(theta_i - theta_j), y = 1/x.
/// Loads are multiplied bus-wise by `load_scale` (empty = all ones). Returns
/// converged=false when the iteration limit is hit or the iterate blows up;
/// throws NumericalError on a singular Jacobian.
PowerFlowSolution solve_power_flow(const GridCase& grid, std::span<const double> load_scale = {},
                                   const PowerFlowOptions& options = {});

/// One factor per bus: uniform in [low, high] for buses with a nonzero load,
/// exactly 1 elsewhere.
std::vector<double> scale_loads(const GridCase& grid, double low, double high, std::uint64_t seed);

/// Copy of `grid` with bus loads multiplied by `load_scale`.
GridCase apply_load_scale(const GridCase& grid, std::span<const double> load_scale);

/// Power-balance residuals evaluated directly from the injection equations:
/// P residual at every non-slack bus, Q residual at every PQ bus.
std::vector<double> power_flow_residuals(const GridCase& grid, std::span<const double> load_scale,
                                         std::span<const double> theta, std::span<const double> vmag);

/// max |theta_i - theta_j| over branches is below `limit`.
bool branch_angles_within(const GridCase& grid, const PowerFlowSolution& sol,
                          double limit = std::numbers::pi / 2);

/// Feasibility screen used during topology generation: convergence plus the
/// branch-angle rule.
bool power_flow_feasible(const GridCase& grid, std::span<const double> load_scale = {});

/// Generator active/reactive output (p.u.) implied by a solved state, in
/// generator order: injection plus the local load.
std::vector<double> generator_p(const GridCase& grid, std::span<const double> load_scale,
                                const PowerFlowSolution& sol);
std::vector<double> generator_q(const GridCase& grid, std::span<const double> load_scale,
                                const PowerFlowSolution& sol);

}  // namespace tslab
