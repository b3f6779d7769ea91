#include "tslab/simulator.hpp"

#include "tslab/error.hpp"
#include "tslab/rng.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdio>
#include <mutex>
#include <numbers>
#include <thread>

namespace tslab {

namespace {

constexpr double kTimeEps = 1e-9;
using cd = std::complex<double>;

double wrap_pi(double a) {
    a = std::remainder(a, 2.0 * std::numbers::pi);
    return a;
}

}  // namespace

// ---------------------------------------------------------------------------

StepSchedule StepSchedule::standard() { return StepSchedule{{{2.0, 0.005}, {10.0, 0.01}}}; }

StepSchedule StepSchedule::refined(int factor) const {
    StepSchedule out = *this;
    for (auto& s : out.segments) s.dt /= factor;
    return out;
}

std::vector<double> StepSchedule::sample_times() const {
    std::vector<double> t{0.0};
    double start = 0.0;
    for (const StepSegment& seg : segments) {
        if (!(seg.dt > 0.0) || !(seg.t_end > start)) throw InvalidParameter("bad step schedule segment");
        const auto steps = static_cast<long>(std::llround((seg.t_end - start) / seg.dt));
        if (std::abs(steps * seg.dt - (seg.t_end - start)) > 1e-9) {
            throw InvalidParameter("segment length is not a multiple of its step");
        }
        for (long k = 1; k <= steps; ++k) t.push_back(k == steps ? seg.t_end : start + static_cast<double>(k) * seg.dt);
        start = seg.t_end;
    }
    return t;
}

void FaultSpec::validate() const {
    if (!(t_apply < t_clear_near && t_clear_near < t_clear_remote)) {
        throw InvalidParameter("fault times must satisfy t_apply < t_clear_near < t_clear_remote");
    }
    if (!(shunt_admittance > 0.0)) throw InvalidParameter("fault shunt must be positive");
}

int FaultSpec::fault_bus(const GridCase& grid) const {
    if (!faulted_branch) return 0;
    if (*faulted_branch >= grid.branch_count()) throw ScenarioInvalid("faulted branch index out of range");
    const Branch& br = grid.branches[*faulted_branch];
    return faulted_end == FaultEnd::Near ? br.from : br.to;
}

// ---------------------------------------------------------------------------

std::size_t SwingSystem::phase_at(double t) const {
    std::size_t p = switches.empty() ? 0 : switches.front().phase;
    for (const PhaseSwitch& s : switches) {
        if (s.time <= t + kTimeEps) p = s.phase;
    }
    return p;
}

Eigen::VectorXcd SwingSystem::emf_phasors(const Eigen::VectorXd& delta) const {
    Eigen::VectorXcd e(delta.size());
    for (Eigen::Index i = 0; i < delta.size(); ++i) e(i) = std::polar(machines.emf(i), delta(i));
    return e;
}

Eigen::VectorXd SwingSystem::electrical_power(std::size_t phase, const Eigen::VectorXd& delta) const {
    const Eigen::VectorXcd e = emf_phasors(delta);
    const Eigen::VectorXcd i = phases[phase].y_reduced * e;
    Eigen::VectorXd pe(delta.size());
    for (Eigen::Index k = 0; k < delta.size(); ++k) pe(k) = (e(k) * std::conj(i(k))).real();
    return pe;
}

SwingResult integrate_swing(const SwingSystem& sys, const Eigen::VectorXd& delta0, const Eigen::VectorXd& omega0,
                            const StepSchedule& schedule, double blowup_speed) {
    const auto g = static_cast<Eigen::Index>(sys.machine_count());
    if (delta0.size() != g || omega0.size() != g) throw InvalidParameter("initial state size mismatch");
    const std::vector<double> all_times = schedule.sample_times();
    const auto t_count = static_cast<Eigen::Index>(all_times.size());
    const bool with_buses = !sys.phases.empty() && sys.phases.front().bus_map.size() > 0;
    const Eigen::Index n = with_buses ? sys.phases.front().bus_map.rows() : 0;

    SwingResult r;
    r.delta.resize(g, t_count);
    r.omega.resize(g, t_count);
    if (with_buses) r.bus_theta.resize(n, t_count);

    const Eigen::VectorXd& m = sys.machines.inertia;
    const Eigen::VectorXd& d = sys.machines.damping;
    const Eigen::VectorXd& pm = sys.machines.p_mech;

    auto record = [&](Eigen::Index k, const Eigen::VectorXd& delta, const Eigen::VectorXd& omega) {
        r.delta.col(k) = delta;
        r.omega.col(k) = omega;
        if (!with_buses) return;
        const std::size_t ph = sys.phase_at(all_times[static_cast<std::size_t>(k)]);
        const Eigen::VectorXcd v = sys.phases[ph].bus_map * sys.emf_phasors(delta);
        for (Eigen::Index b = 0; b < n; ++b) {
            const double raw = std::arg(v(b));
            // Unwrap in time; the first sample is anchored to the first rotor
            // angle so that a frame shift moves every bus angle with it.
            const double ref = k == 0 ? delta(0) : r.bus_theta(b, k - 1);
            r.bus_theta(b, k) = ref + wrap_pi(raw - ref);
        }
    };

    Eigen::VectorXd delta = delta0, omega = omega0;
    record(0, delta, omega);
    Eigen::Index last = 0;
    for (Eigen::Index k = 0; k + 1 < t_count; ++k) {
        const double t = all_times[static_cast<std::size_t>(k)];
        const double h = all_times[static_cast<std::size_t>(k + 1)] - t;
        const std::size_t ph = sys.phase_at(t);
        auto accel = [&](const Eigen::VectorXd& dl, const Eigen::VectorXd& om) -> Eigen::VectorXd {
            return ((pm - sys.electrical_power(ph, dl) - d.cwiseProduct(om)).array() / m.array()).matrix();
        };
        const Eigen::VectorXd k1d = omega;
        const Eigen::VectorXd k1w = accel(delta, omega);
        const Eigen::VectorXd k2d = omega + 0.5 * h * k1w;
        const Eigen::VectorXd k2w = accel(delta + 0.5 * h * k1d, k2d);
        const Eigen::VectorXd k3d = omega + 0.5 * h * k2w;
        const Eigen::VectorXd k3w = accel(delta + 0.5 * h * k2d, k3d);
        const Eigen::VectorXd k4d = omega + h * k3w;
        const Eigen::VectorXd k4w = accel(delta + h * k3d, k4d);
        delta += (h / 6.0) * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
        omega += (h / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        record(k + 1, delta, omega);
        last = k + 1;
        if (!omega.allFinite() || !delta.allFinite() || omega.cwiseAbs().maxCoeff() > blowup_speed) {
            r.early_stop = true;
            break;
        }
    }
    const Eigen::Index kept = last + 1;
    r.times.assign(all_times.begin(), all_times.begin() + kept);
    r.delta.conservativeResize(g, kept);
    r.omega.conservativeResize(g, kept);
    if (with_buses) r.bus_theta.conservativeResize(n, kept);
    return r;
}

double classical_energy(const SwingSystem& sys, std::size_t phase, const Eigen::VectorXd& delta,
                        const Eigen::VectorXd& omega) {
    const auto& y = sys.phases[phase].y_reduced;
    const auto& e = sys.machines.emf;
    double w = 0.0;
    for (Eigen::Index i = 0; i < delta.size(); ++i) {
        w += 0.5 * sys.machines.inertia(i) * omega(i) * omega(i) - sys.machines.p_mech(i) * delta(i);
        for (Eigen::Index j = i + 1; j < delta.size(); ++j) {
            w -= e(i) * e(j) * y(i, j).imag() * std::cos(delta(i) - delta(j));
        }
    }
    return w;
}

// ---------------------------------------------------------------------------

InitialState initial_state(const GridCase& grid, std::span<const double> load_scale) {
    InitialState init;
    init.load_scale.assign(load_scale.begin(), load_scale.end());
    if (init.load_scale.empty()) init.load_scale.assign(grid.bus_count(), 1.0);
    init.power_flow = solve_power_flow(grid, init.load_scale);
    if (!init.power_flow.converged) throw ScenarioInvalid("pre-fault power flow did not converge");

    const auto pg = generator_p(grid, init.load_scale, init.power_flow);
    const auto qg = generator_q(grid, init.load_scale, init.power_flow);
    const auto g = static_cast<Eigen::Index>(grid.generators.size());
    init.machines.inertia.resize(g);
    init.machines.damping.resize(g);
    init.machines.p_mech.resize(g);
    init.machines.emf.resize(g);
    init.delta0.resize(g);
    for (Eigen::Index k = 0; k < g; ++k) {
        const Generator& gen = grid.generators[static_cast<std::size_t>(k)];
        const auto b = static_cast<std::size_t>(gen.bus - 1);
        const cd v = std::polar(init.power_flow.vmag[b], init.power_flow.theta[b]);
        const cd s(pg[static_cast<std::size_t>(k)], qg[static_cast<std::size_t>(k)]);
        const cd i = std::conj(s / v);
        const cd e = v + cd(0.0, gen.xd_prime) * i;
        init.machines.inertia(k) = gen.inertia;
        init.machines.damping(k) = gen.damping;
        init.machines.p_mech(k) = pg[static_cast<std::size_t>(k)];
        init.machines.emf(k) = std::abs(e);
        init.delta0(k) = std::arg(e);
    }
    return init;
}

NetworkPhase reduce_network(const GridCase& grid, const InitialState& init, int fault_bus,
                            std::optional<std::size_t> removed_branch, double fault_shunt) {
    const auto n = static_cast<Eigen::Index>(grid.bus_count());
    const auto g = static_cast<Eigen::Index>(grid.generators.size());
    Eigen::MatrixXcd ybb = Eigen::MatrixXcd::Zero(n, n);
    for (std::size_t l = 0; l < grid.branch_count(); ++l) {
        if (removed_branch && *removed_branch == l) continue;
        const Branch& br = grid.branches[l];
        const cd y(0.0, -1.0 / br.x);
        const Eigen::Index i = br.from - 1, j = br.to - 1;
        ybb(i, i) += y;
        ybb(j, j) += y;
        ybb(i, j) -= y;
        ybb(j, i) -= y;
    }
    const auto& pf = init.power_flow;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Bus& b = grid.buses[static_cast<std::size_t>(i)];
        const double s = init.load_scale[static_cast<std::size_t>(i)];
        const double v2 = pf.vmag[static_cast<std::size_t>(i)] * pf.vmag[static_cast<std::size_t>(i)];
        ybb(i, i) += cd(b.p_load * s, -b.q_load * s) / v2;
    }
    if (fault_bus > 0) ybb(fault_bus - 1, fault_bus - 1) += fault_shunt;

    Eigen::MatrixXcd ybg = Eigen::MatrixXcd::Zero(n, g);
    Eigen::VectorXcd yg(g);
    for (Eigen::Index k = 0; k < g; ++k) {
        const Generator& gen = grid.generators[static_cast<std::size_t>(k)];
        yg(k) = cd(0.0, -1.0 / gen.xd_prime);
        ybb(gen.bus - 1, gen.bus - 1) += yg(k);
        ybg(gen.bus - 1, k) = -yg(k);
    }
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(ybb);
    if (!lu.isInvertible()) throw NumericalError("singular bus admittance matrix in network reduction");

    NetworkPhase phase;
    phase.bus_map = -lu.solve(ybg);
    phase.y_reduced = yg.asDiagonal();
    for (Eigen::Index k = 0; k < g; ++k) {
        const Eigen::Index b = grid.generators[static_cast<std::size_t>(k)].bus - 1;
        phase.y_reduced.row(k) -= yg(k) * phase.bus_map.row(b);
    }
    return phase;
}

SwingSystem build_swing_system(const GridCase& grid, const InitialState& init, const FaultSpec& fault) {
    SwingSystem sys;
    sys.machines = init.machines;
    sys.phases.push_back(reduce_network(grid, init, 0, std::nullopt));
    sys.switches.push_back({0.0, 0});
    if (!fault.faulted_branch) return sys;

    fault.validate();
    const std::size_t br = *fault.faulted_branch;
    const int bus = fault.fault_bus(grid);
    const std::size_t removed[] = {br};
    if (!is_connected(grid, removed)) throw ScenarioInvalid("post-fault network is disconnected");

    sys.phases.push_back(reduce_network(grid, init, bus, std::nullopt, fault.shunt_admittance));
    sys.phases.push_back(reduce_network(grid, init, bus, br, fault.shunt_admittance));
    sys.phases.push_back(reduce_network(grid, init, 0, br));
    sys.switches.push_back({fault.t_apply, 1});
    sys.switches.push_back({fault.t_clear_near, 2});
    sys.switches.push_back({fault.t_clear_remote, 3});
    return sys;
}

TsiResult tsi(std::span<const double> rotor_delta_final) {
    if (rotor_delta_final.size() < 2) throw InvalidParameter("tsi needs at least two generators");
    const auto [lo, hi] = std::minmax_element(rotor_delta_final.begin(), rotor_delta_final.end());
    const double sep = std::abs(*hi - *lo);
    const double two_pi = 2.0 * std::numbers::pi;
    TsiResult r;
    r.eta = (two_pi - sep) / (two_pi + sep);
    r.label = r.eta > 0.0 ? 1 : 0;
    return r;
}

TrajectoryRecord simulate(const GridCase& grid, const Scenario& scenario, const StepSchedule& schedule) {
    const InitialState init = initial_state(grid, scenario.load_scale);
    const SwingSystem sys = build_swing_system(grid, init, scenario.fault);
    const Eigen::VectorXd omega0 = Eigen::VectorXd::Zero(init.delta0.size());
    SwingResult res = integrate_swing(sys, init.delta0, omega0, schedule);

    TrajectoryRecord rec;
    rec.scenario = scenario;
    rec.scenario.load_scale = init.load_scale;
    rec.times = std::move(res.times);
    rec.bus_theta = std::move(res.bus_theta);
    rec.rotor_delta = std::move(res.delta);
    rec.early_stop = res.early_stop;
    rec.horizon = rec.times.back();
    if (rec.early_stop) {
        rec.tsi = -1.0;  // separation diverges
        rec.label = 0;
    } else {
        const Eigen::VectorXd final_delta = rec.rotor_delta.col(rec.rotor_delta.cols() - 1);
        const TsiResult t = tsi(std::span<const double>(final_delta.data(), static_cast<std::size_t>(final_delta.size())));
        rec.tsi = t.eta;
        rec.label = t.label;
    }
    return rec;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> faultable_branches(const GridCase& grid) {
    std::vector<std::size_t> out;
    for (std::size_t l = 0; l < grid.branch_count(); ++l) {
        const Branch& br = grid.branches[l];
        if (grid.is_generator_bus(br.from) || grid.is_generator_bus(br.to)) continue;
        const std::size_t removed[] = {l};
        if (is_connected(grid, removed)) out.push_back(l);
    }
    return out;
}

std::vector<CampaignItem> plan_campaign(const std::vector<TopologyEntry>& topologies, const CampaignPlan& plan,
                                        std::uint64_t seed) {
    if (plan.load_draws < 1) throw InvalidParameter("load_draws must be >= 1");
    std::vector<CampaignItem> items;
    for (std::size_t t = 0; t < topologies.size(); ++t) {
        const TopologyEntry& topo = topologies[t];
        const std::uint64_t topo_seed = derive_seed(seed, topo.spec.id);
        const auto eligible = faultable_branches(topo.grid);
        for (int ld = 0; ld < plan.load_draws; ++ld) {
            const std::uint64_t draw_seed = derive_seed(topo_seed, static_cast<std::uint64_t>(ld));
            const auto scale = scale_loads(topo.grid, plan.load_low, plan.load_high, derive_seed(draw_seed, "load"));
            std::vector<std::size_t> branches = eligible;
            if (plan.branches_per_draw > 0 && static_cast<std::size_t>(plan.branches_per_draw) < branches.size()) {
                Rng rng(derive_seed(draw_seed, "branches"));
                shuffle(branches, rng);
                branches.resize(static_cast<std::size_t>(plan.branches_per_draw));
                std::sort(branches.begin(), branches.end());
            }
            for (std::size_t br : branches) {
                for (FaultEnd end : {FaultEnd::Near, FaultEnd::Remote}) {
                    CampaignItem item;
                    item.index = items.size();
                    item.topology = t;
                    char id[64];
                    std::snprintf(id, sizeof id, "L%02d_B%03zu_%s", ld, br, end == FaultEnd::Near ? "near" : "remote");
                    item.scenario.id = id;
                    item.scenario.topology_id = topo.spec.id;
                    item.scenario.load_scale = scale;
                    item.scenario.fault.faulted_branch = br;
                    item.scenario.fault.faulted_end = end;
                    item.scenario.seed = draw_seed;
                    items.push_back(std::move(item));
                }
            }
        }
    }
    return items;
}

CampaignSummary run_campaign(const std::vector<TopologyEntry>& topologies, const std::vector<CampaignItem>& items,
                             const StepSchedule& schedule, unsigned workers, const RecordSink& sink) {
    CampaignSummary summary;
    summary.planned = items.size();
    std::mutex mu;
    std::atomic<std::size_t> next{0};

    auto work = [&] {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= items.size()) return;
            const CampaignItem& item = items[k];
            try {
                TrajectoryRecord rec = simulate(topologies.at(item.topology).grid, item.scenario, schedule);
                const int label = rec.label;
                if (sink) sink(item, std::move(rec));
                std::lock_guard lock(mu);
                ++summary.succeeded;
                ++(label == 1 ? summary.stable : summary.unstable);
            } catch (const std::exception& e) {
                std::lock_guard lock(mu);
                ++summary.failed;
                summary.failures.push_back(item.scenario.topology_id + "/" + item.scenario.id + ": " + e.what());
            }
        }
    };
    workers = std::max(1u, workers);
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    std::sort(summary.failures.begin(), summary.failures.end());
    return summary;
}

}  // namespace tslab
