#include "test_util.hpp"

#include "tslab/case39.hpp"
#include "tslab/error.hpp"
#include "tslab/simulator.hpp"

#include <doctest.h>

#include <cmath>
#include <mutex>
#include <numbers>

using namespace tslab;
using namespace tslab::testing;

namespace {

constexpr double kPi = std::numbers::pi;

/// Machine 1 against a near-infinite bus through x = 1 (E = 1 both sides),
/// with a bolted fault that zeroes the transfer between t_apply and t_clear.
SwingSystem smib(double inertia, double p_mech, double t_clear) {
    SwingSystem s;
    s.machines.inertia = Eigen::Vector2d(inertia, 1e12);
    s.machines.damping = Eigen::Vector2d::Zero();
    s.machines.p_mech = Eigen::Vector2d(p_mech, -p_mech);
    s.machines.emf = Eigen::Vector2d::Ones();
    using C = std::complex<double>;
    NetworkPhase intact, faulted;
    intact.y_reduced.resize(2, 2);
    intact.y_reduced << C(0, -1), C(0, 1), C(0, 1), C(0, -1);
    faulted.y_reduced = Eigen::MatrixXcd::Zero(2, 2);
    s.phases = {intact, faulted};
    s.switches = {{0.0, 0}, {0.0, 1}, {t_clear, 0}};
    return s;
}

StepSchedule uniform_schedule(double horizon, double dt) { return StepSchedule{{{horizon, dt}}}; }

double max_separation(const SwingResult& r) {
    double m = 0.0;
    for (Eigen::Index t = 0; t < r.delta.cols(); ++t) m = std::max(m, r.delta(0, t) - r.delta(1, t));
    return m;
}

Scenario fault_scenario(const GridCase& g, std::size_t branch, FaultEnd end) {
    Scenario s;
    s.id = "test";
    s.topology_id = "base";
    s.load_scale.assign(g.bus_count(), 1.0);
    s.fault.faulted_branch = branch;
    s.fault.faulted_end = end;
    return s;
}

/// Faultable branch carrying the least base-case flow.
std::size_t lightest_branch(const GridCase& g) {
    const auto pf = solve_power_flow(g);
    std::size_t best = 0;
    double flow = 1e9;
    for (std::size_t l : faultable_branches(g)) {
        const auto& b = g.branches[l];
        const double f = std::abs(std::sin(pf.theta[b.from - 1] - pf.theta[b.to - 1]) / b.x);
        if (f < flow) {
            flow = f;
            best = l;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("tsi worked values") {
    const double same[] = {0.3, 0.3, 0.3};
    CHECK(tsi(same).eta == 1.0);
    CHECK(tsi(same).label == 1);
    const double boundary[] = {0.0, 2 * kPi};
    CHECK(tsi(boundary).eta == doctest::Approx(0.0));
    CHECK(tsi(boundary).label == 0);
    const double far[] = {1.0, 1.0 + 6 * kPi, 2.0};
    CHECK(tsi(far).eta == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(tsi(far).label == 0);
    const double one[] = {1.0};
    CHECK_THROWS_AS(tsi(one), InvalidParameter);
}

TEST_CASE("step schedule") {
    const StepSchedule s = StepSchedule::standard();
    const auto t = s.sample_times();
    CHECK(t.front() == 0.0);
    CHECK(t.back() == doctest::Approx(10.0));
    CHECK(t.size() == 1 + 400 + 800);
    CHECK(t[1] == doctest::Approx(0.005));
    CHECK(t[401] == doctest::Approx(2.01));
    CHECK(s.refined(2).sample_times().size() == 1 + 800 + 1600);
}

TEST_CASE("undisturbed 39-bus run stays at equilibrium") {
    const GridCase g = load_case("ieee39");
    Scenario s;
    s.id = "quiet";
    s.load_scale.assign(39, 1.0);
    const TrajectoryRecord r = simulate(g, s);
    CHECK(r.label == 1);
    CHECK_FALSE(r.early_stop);
    CHECK(r.horizon == doctest::Approx(10.0));
    double drift = 0.0;
    for (Eigen::Index t = 0; t < r.rotor_delta.cols(); ++t) {
        drift = std::max(drift, (r.rotor_delta.col(t) - r.rotor_delta.col(0)).cwiseAbs().maxCoeff());
    }
    CHECK(drift < 1e-3);
    // Bus angles at t = 0 reproduce the power flow relative to the slack.
    const auto pf = solve_power_flow(g);
    const double ref = r.bus_theta(g.slack_bus() - 1, 0);
    for (Eigen::Index i = 0; i < 39; ++i) CHECK(r.bus_theta(i, 0) - ref == doctest::Approx(pf.theta[i]).epsilon(1e-8));
}

TEST_CASE("SMIB critical clearing matches equal area") {
    const double pm = 0.5, m = 0.02, dt = 1e-3;
    const double d0 = std::asin(pm);
    const double dcc = std::acos((kPi - 2 * d0) * pm + std::cos(kPi - d0));
    const double dmax = kPi - d0;
    // Fault-on motion with no electrical output: delta = d0 + pm t^2 / (2 m).
    const double tcc = std::sqrt(2 * m * (dcc - d0) / pm);

    const Eigen::VectorXd delta0 = Eigen::Vector2d(d0, 0.0), omega0 = Eigen::Vector2d::Zero();
    const double before = std::floor(tcc / dt) * dt - dt;
    const double after = std::ceil(tcc / dt) * dt + dt;
    const SwingResult ok = integrate_swing(smib(m, pm, before), delta0, omega0, uniform_schedule(1.5, dt));
    const SwingResult lost = integrate_swing(smib(m, pm, after), delta0, omega0, uniform_schedule(1.5, dt));
    CHECK(max_separation(ok) < dmax);
    CHECK(max_separation(lost) > dmax);

    // Independent check of the oracle: equal areas at the computed angle by quadrature.
    const int n = 20000;
    double accel = 0.0, decel = 0.0;
    for (int k = 0; k < n; ++k) {
        const double a = d0 + (dcc - d0) * (k + 0.5) / n;
        accel += pm * (dcc - d0) / n;
        const double b = dcc + (dmax - dcc) * (k + 0.5) / n;
        decel += (std::sin(b) - pm) * (dmax - dcc) / n;
        (void)a;
    }
    CHECK(accel == doctest::Approx(decel).epsilon(1e-8));
}

TEST_CASE("undamped conservative network keeps its energy") {
    const GridCase g = load_case("ieee39");
    const InitialState init = initial_state(g, std::vector<double>(39, 1.0));
    SwingSystem sys;
    sys.machines = init.machines;
    sys.machines.damping.setZero();
    NetworkPhase ph = reduce_network(g, init, 0, std::nullopt);
    ph.y_reduced = Eigen::MatrixXcd(ph.y_reduced.imag().cast<std::complex<double>>() * std::complex<double>(0, 1));
    ph.bus_map.resize(0, 0);
    sys.phases = {ph};
    sys.switches = {{0.0, 0}};
    sys.machines.p_mech = sys.electrical_power(0, init.delta0);
    Rng rng(4);
    Eigen::VectorXd d0 = init.delta0;
    for (Eigen::Index i = 0; i < d0.size(); ++i) d0[i] += uniform(rng, -0.2, 0.2);
    const Eigen::VectorXd w0 = Eigen::VectorXd::Zero(d0.size());
    const SwingResult r = integrate_swing(sys, d0, w0, StepSchedule::standard());
    REQUIRE_FALSE(r.early_stop);
    const double e0 = classical_energy(sys, 0, r.delta.col(0), r.omega.col(0));
    double worst = 0.0, swing = 0.0;
    for (Eigen::Index t = 0; t < r.delta.cols(); ++t) {
        worst = std::max(worst, std::abs(classical_energy(sys, 0, r.delta.col(t), r.omega.col(t)) - e0));
        swing = std::max(swing, r.omega.col(t).cwiseAbs().maxCoeff());
    }
    MESSAGE("energy drift " << worst / std::abs(e0) << " peak speed " << swing);
    CHECK(swing > 0.1);  // the system actually moves
    CHECK(worst / std::abs(e0) < 1e-6);
}

TEST_CASE("39-bus fault on a lightly loaded line is stable and converges under step halving") {
    const GridCase g = load_case("ieee39");
    const std::size_t br = lightest_branch(g);
    for (FaultEnd end : {FaultEnd::Near, FaultEnd::Remote}) {
        const Scenario s = fault_scenario(g, br, end);
        const TrajectoryRecord r = simulate(g, s);
        CHECK(r.label == 1);
        CHECK(r.tsi > 0.0);
        const Eigen::VectorXd fin = r.rotor_delta.col(r.rotor_delta.cols() - 1);
        CHECK(fin.maxCoeff() - fin.minCoeff() < 2 * kPi);

        const TrajectoryRecord fine = simulate(g, s, StepSchedule::standard().refined(2));
        const Eigen::VectorXd fin2 = fine.rotor_delta.col(fine.rotor_delta.cols() - 1);
        CHECK((fin - fin2).cwiseAbs().maxCoeff() < 1e-4);
    }
}

TEST_CASE("rotor frame shift") {
    const GridCase g = load_case("ieee39");
    const InitialState init = initial_state(g, std::vector<double>(39, 1.0));
    FaultSpec f;
    f.faulted_branch = lightest_branch(g);
    const SwingSystem sys = build_swing_system(g, init, f);
    const Eigen::VectorXd w0 = Eigen::VectorXd::Zero(init.delta0.size());
    const double c = 0.7;
    const SwingResult a = integrate_swing(sys, init.delta0, w0, StepSchedule::standard());
    const SwingResult b = integrate_swing(sys, init.delta0.array() + c, w0, StepSchedule::standard());
    CHECK(((b.bus_theta.array() - a.bus_theta.array()) - c).abs().maxCoeff() < 1e-8);
    const Eigen::VectorXd fa = a.delta.col(a.delta.cols() - 1), fb = b.delta.col(b.delta.cols() - 1);
    CHECK(tsi(std::span<const double>(fa.data(), 10)).eta ==
          doctest::Approx(tsi(std::span<const double>(fb.data(), 10)).eta).epsilon(1e-9));
}

TEST_CASE("fault validation and islanding") {
    FaultSpec f;
    f.faulted_branch = 0;
    CHECK_NOTHROW(f.validate());
    f.t_clear_near = 0.05;
    CHECK_THROWS(f.validate());

    GridCase path = path_case(3, 0.1);
    path.buses[2].p_load = 0.1;
    const InitialState init = initial_state(path, std::vector<double>(3, 1.0));
    FaultSpec bridge;
    bridge.faulted_branch = 1;
    CHECK_THROWS_AS(build_swing_system(path, init, bridge), ScenarioInvalid);

    const GridCase g = load_case("ieee39");
    FaultSpec near, remote;
    near.faulted_branch = remote.faulted_branch = 0;
    remote.faulted_end = FaultEnd::Remote;
    CHECK(near.fault_bus(g) == g.branches[0].from);
    CHECK(remote.fault_bus(g) == g.branches[0].to);
}

TEST_CASE("campaign counting, determinism and class balance") {
    const GridCase g = load_case("ieee39");
    std::vector<TopologyEntry> topo{{base_topology(g), g}};
    CampaignPlan small;
    small.load_draws = 2;
    small.branches_per_draw = 3;
    const auto items = plan_campaign(topo, small, 8);
    REQUIRE(items.size() == 12);
    for (std::size_t i = 0; i < items.size(); ++i) CHECK(items[i].index == i);

    auto collect = [&](unsigned workers) {
        std::vector<Eigen::MatrixXd> out(items.size());
        const auto sum = run_campaign(topo, items, small.schedule, workers,
                                      [&](const CampaignItem& it, TrajectoryRecord&& r) { out[it.index] = r.bus_theta; });
        CHECK(sum.planned == 12);
        CHECK(sum.succeeded + sum.failed == 12);
        return out;
    };
    const auto a = collect(1), b = collect(3);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    CHECK(plan_campaign(topo, small, 8).size() == items.size());
    CHECK(plan_campaign(topo, small, 8)[5].scenario.load_scale == items[5].scenario.load_scale);

    CampaignPlan full;
    full.load_draws = 3;
    const auto all = plan_campaign(topo, full, 2);
    CHECK(all.size() == 3 * 2 * faultable_branches(g).size());
    const auto sum = run_campaign(topo, all, full.schedule, 1, nullptr);
    CHECK(sum.failed == 0);
    REQUIRE(sum.unstable > 0);
    const double ratio = static_cast<double>(sum.stable) / static_cast<double>(sum.unstable);
    MESSAGE("stable:unstable = " << sum.stable << ":" << sum.unstable);
    CHECK(ratio >= 1.2);
    CHECK(ratio <= 3.5);
}
