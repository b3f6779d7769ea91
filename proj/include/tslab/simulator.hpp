#pragma once

#include "tslab/grid.hpp"
#include "tslab/powerflow.hpp"
#include "tslab/topogen.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace tslab {

// ---------------------------------------------------------------------------
// Schedule and scenario types
// ---------------------------------------------------------------------------

struct StepSegment {
    double t_end = 0.0;
    double dt = 0.0;
};

/// Piecewise-constant integration/sampling step. Samples are taken at every
/// step boundary, starting at t = 0.
struct StepSchedule {
    std::vector<StepSegment> segments;

    /// 0.005 s on [0, 2], 0.01 s on [2, 10].
    static StepSchedule standard();
    /// Same breakpoints with every step divided by `factor`.
    StepSchedule refined(int factor) const;

    std::vector<double> sample_times() const;
    double horizon() const { return segments.empty() ? 0.0 : segments.back().t_end; }
};

enum class FaultEnd { Near, Remote };

/// Three-phase-to-ground fault on one end of a branch. The fault sits at the
/// from-bus for Near and at the to-bus for Remote. The breaker at the faulted
/// end opens at t_clear_near; the other end opens, and the fault is removed,
/// at t_clear_remote.
struct FaultSpec {
    std::optional<std::size_t> faulted_branch;  ///< none = undisturbed run
    FaultEnd faulted_end = FaultEnd::Near;
    double t_apply = 0.10;
    double t_clear_near = 0.19;
    double t_clear_remote = 0.20;
    double shunt_admittance = 1e6;

    void validate() const;
    /// Bus id carrying the fault shunt.
    int fault_bus(const GridCase& grid) const;
};

struct Scenario {
    std::string id;
    std::string topology_id;
    std::vector<double> load_scale;  ///< per bus
    FaultSpec fault;
    std::uint64_t seed = 0;
};

struct TrajectoryRecord {
    std::vector<double> times;
    Eigen::MatrixXd bus_theta;    ///< n x T, unwrapped (rad)
    Eigen::MatrixXd rotor_delta;  ///< g x T (rad)
    Scenario scenario;
    int label = 0;  ///< 1 stable, 0 unstable
    double tsi = 0.0;
    bool early_stop = false;
    double horizon = 0.0;  ///< simulated end time (s)
};

// ---------------------------------------------------------------------------
// Swing integrator on Kron-reduced networks
// ---------------------------------------------------------------------------

/// Network seen by the internal EMFs during one phase of the event sequence.
struct NetworkPhase {
    Eigen::MatrixXcd y_reduced;  ///< g x g, I = Y E
    Eigen::MatrixXcd bus_map;    ///< n x g, V_bus = K E (may be empty)
};

struct MachineSet {
    Eigen::VectorXd inertia;
    Eigen::VectorXd damping;
    Eigen::VectorXd p_mech;
    Eigen::VectorXd emf;  ///< |E'|
};

/// phase `phase` is active for t >= time (until the next switch).
struct PhaseSwitch {
    double time = 0.0;
    std::size_t phase = 0;
};

struct SwingSystem {
    MachineSet machines;
    std::vector<NetworkPhase> phases;
    std::vector<PhaseSwitch> switches;  ///< sorted; first at t = 0

    std::size_t machine_count() const { return static_cast<std::size_t>(machines.inertia.size()); }
    std::size_t phase_at(double t) const;
    /// Electrical output P_e,i = Re(E_i conj((Y E)_i)).
    Eigen::VectorXd electrical_power(std::size_t phase, const Eigen::VectorXd& delta) const;
    Eigen::VectorXcd emf_phasors(const Eigen::VectorXd& delta) const;
};

struct SwingResult {
    std::vector<double> times;
    Eigen::MatrixXd delta;      ///< g x T
    Eigen::MatrixXd omega;      ///< g x T, rad/s deviation
    Eigen::MatrixXd bus_theta;  ///< n x T (empty when phases carry no bus map)
    bool early_stop = false;
};

inline constexpr double kBlowupSpeed = 1e3;

/// Fixed-step RK4 of M d2(delta)/dt2 = Pm - Pe(delta) - D d(delta)/dt over the
/// schedule. Each step uses the phase active at its start time. Stops early
/// once any |omega| exceeds `blowup_speed`.
SwingResult integrate_swing(const SwingSystem& sys, const Eigen::VectorXd& delta0, const Eigen::VectorXd& omega0,
                            const StepSchedule& schedule, double blowup_speed = kBlowupSpeed);

/// Classical transient energy for a network without transfer conductances:
/// W = 1/2 sum M w^2 - sum Pm delta - sum_{i<j} E_i E_j B_ij cos(delta_i - delta_j).
double classical_energy(const SwingSystem& sys, std::size_t phase, const Eigen::VectorXd& delta,
                        const Eigen::VectorXd& omega);

// ---------------------------------------------------------------------------
// Grid-level simulation
// ---------------------------------------------------------------------------

/// Pre-fault operating point of a case under a load scaling.
struct InitialState {
    PowerFlowSolution power_flow;
    MachineSet machines;
    Eigen::VectorXd delta0;
    std::vector<double> load_scale;
};

/// Runs the power flow and places each EMF behind x'd. Throws ScenarioInvalid
/// if the power flow does not converge.
InitialState initial_state(const GridCase& grid, std::span<const double> load_scale);

/// Kron-reduces the bus network (loads as constant admittances from the
/// pre-fault solution) onto the generator internal nodes.
/// `fault_bus` = 0 for no fault; `removed_branch` = none keeps all branches.
NetworkPhase reduce_network(const GridCase& grid, const InitialState& init, int fault_bus,
                            std::optional<std::size_t> removed_branch, double fault_shunt = 1e6);

/// Builds the phase sequence (pre-fault / fault-on / near-end open / post-fault)
/// for a scenario. Throws ScenarioInvalid if the post-fault network islands.
SwingSystem build_swing_system(const GridCase& grid, const InitialState& init, const FaultSpec& fault);

/// Simulates one scenario on the standard schedule.
TrajectoryRecord simulate(const GridCase& grid, const Scenario& scenario,
                          const StepSchedule& schedule = StepSchedule::standard());

struct TsiResult {
    double eta = 0.0;
    int label = 0;
};

/// eta = (2 pi - d) / (2 pi + d), d = max_{i<j} |delta_i - delta_j|; label 1 iff eta > 0.
TsiResult tsi(std::span<const double> rotor_delta_final);

// ---------------------------------------------------------------------------
// Campaigns
// ---------------------------------------------------------------------------

struct TopologyEntry {
    TopologySpec spec;
    GridCase grid;
};

struct CampaignPlan {
    int load_draws = 1;
    int branches_per_draw = 0;  ///< 0 = every eligible branch
    double load_low = 0.8;
    double load_high = 1.2;
    StepSchedule schedule = StepSchedule::standard();
};

struct CampaignItem {
    std::size_t index = 0;  ///< position in the planned sweep
    std::size_t topology = 0;
    Scenario scenario;
};

/// Branches that may be faulted: not incident to a generator bus and not a
/// bridge (the post-fault grid stays connected).
std::vector<std::size_t> faultable_branches(const GridCase& grid);

/// Deterministic Cartesian sweep (topology x load draw x branch x end).
std::vector<CampaignItem> plan_campaign(const std::vector<TopologyEntry>& topologies, const CampaignPlan& plan,
                                        std::uint64_t seed);

struct CampaignSummary {
    std::size_t planned = 0;
    std::size_t succeeded = 0;
    std::size_t failed = 0;
    std::size_t stable = 0;
    std::size_t unstable = 0;
    std::vector<std::string> failures;  ///< "topology/scenario: reason", sorted
};

using RecordSink = std::function<void(const CampaignItem&, TrajectoryRecord&&)>;

/// Simulates every planned item on `workers` threads. The sink may be invoked
/// concurrently and in any order; failures are logged in the summary and
/// skipped.
CampaignSummary run_campaign(const std::vector<TopologyEntry>& topologies, const std::vector<CampaignItem>& items,
                             const StepSchedule& schedule, unsigned workers, const RecordSink& sink);

}  // namespace tslab
