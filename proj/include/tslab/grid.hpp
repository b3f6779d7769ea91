#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace tslab {

enum class BusType { Slack, PV, PQ };

struct Bus {
    int id = 0;  ///< 1-based, equal to position + 1
    BusType type = BusType::PQ;
    double v_set = 1.0;   ///< voltage magnitude setpoint (p.u.)
    double p_load = 0.0;  ///< active load (p.u.)
    double q_load = 0.0;  ///< reactive load (p.u.)
};

/// Lossless branch; `to` is the sink of the oriented edge.
struct Branch {
    int from = 0;
    int to = 0;
    double x = 0.0;  ///< series reactance (p.u.)
};

/// Classical-model generator data.
struct Generator {
    int bus = 0;
    double inertia = 0.0;   ///< M (s^2/rad, p.u.)
    double damping = 0.0;   ///< D (p.u. power per rad/s)
    double xd_prime = 0.0;  ///< transient reactance (p.u.)
    double p_mech = 0.0;    ///< scheduled active power (p.u.)
};

/// Complete electrical description of one topology.
struct GridCase {
    std::string name;
    double base_mva = 100.0;
    double frequency_hz = 50.0;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> generators;

    std::size_t bus_count() const { return buses.size(); }
    std::size_t branch_count() const { return branches.size(); }

    /// Index into `generators` for the generator at `bus_id`, or -1.
    int generator_at(int bus_id) const;
    bool is_generator_bus(int bus_id) const { return generator_at(bus_id) >= 0; }
    int slack_bus() const;

    /// Throws InvalidCase when any structural invariant is violated
    /// (connectivity included).
    void validate() const;
};

/// Structural checks only: ids, slack count, loops, duplicates, x > 0.
/// `validate()` additionally requires connectivity.
void validate_structure(const GridCase& grid);

struct NetworkMatrices {
    Eigen::MatrixXd incidence;  ///< n x |E|
    Eigen::VectorXd weights;    ///< w_l = V_i V_j / x_l
    Eigen::MatrixXd laplacian;  ///< B diag(w) B^T
    Eigen::MatrixXd pinv;       ///< Moore-Penrose inverse of laplacian
    int rank = 0;
};

inline constexpr double kPinvRelTol = 1e-9;

/// Oriented incidence matrix: -1 at `from`, +1 at `to` for each branch.
Eigen::MatrixXd build_incidence(const GridCase& grid);

/// Weighted Laplacian and its pseudo-inverse for the given bus voltage magnitudes.
NetworkMatrices build_laplacian(const GridCase& grid, std::span<const double> voltages);

/// Eigendecomposition-based pseudo-inverse of a symmetric matrix. Eigenvalues
/// with |lambda| <= rel_tol * max|lambda| are treated as zero.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& a, double rel_tol = kPinvRelTol,
                               int* rank = nullptr);

/// True iff the graph is connected after deleting the listed branch indices.
bool is_connected(const GridCase& grid, std::span<const std::size_t> removed_edges = {});

/// Returns a copy without the listed branches (indices into grid.branches).
GridCase remove_branches(const GridCase& grid, std::span<const std::size_t> removed_edges);

/// Relabels buses: old bus id k (1-based) becomes new_id[k-1]. Branch order is
/// preserved; generators are reordered by their new bus id.
GridCase permute_buses(const GridCase& grid, std::span<const int> new_id);

/// Permutation matrix P with P(new, old) = 1 for the relabeling above.
Eigen::MatrixXd permutation_matrix(std::span<const int> new_id);

}  // namespace tslab
