#include "tslab/features.hpp"

#include "tslab/error.hpp"
#include "tslab/powerflow.hpp"
#include "tslab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace tslab {

std::string variant_name(Variant v) { return v == Variant::Gedf ? "gedf" : "raw"; }

Variant parse_variant(std::string_view s) {
    if (s == "gedf") return Variant::Gedf;
    if (s == "raw") return Variant::Raw;
    throw InvalidInput("unknown variant '" + std::string(s) + "'");
}

bool is_supported_window(double w) {
    for (double allowed : {0.05, 0.10, 0.15, 0.20}) {
        if (std::abs(w - allowed) < 1e-9) return true;
    }
    return false;
}

NetworkMatrices topology_matrices(const GridCase& grid) {
    const PowerFlowSolution pf = solve_power_flow(grid);
    if (!pf.converged) throw ScenarioInvalid("topology '" + grid.name + "' has no base-load power flow");
    return build_laplacian(grid, pf.vmag);
}

Eigen::VectorXd active_power(const NetworkMatrices& nm, const Eigen::VectorXd& theta) {
    const Eigen::VectorXd psi = (nm.incidence.transpose() * theta).array().sin().matrix();
    return nm.incidence * nm.weights.cwiseProduct(psi);
}

Eigen::VectorXd gedf_vector(const NetworkMatrices& nm, const Eigen::VectorXd& p) { return nm.pinv * p; }

void normalize_max_abs(Eigen::MatrixXd& m) {
    if (m.size() == 0) return;
    const double peak = m.cwiseAbs().maxCoeff();
    if (peak > 0.0) m /= peak;
}

std::vector<Eigen::Index> window_columns(const TrajectoryRecord& rec, double window_length_s) {
    if (!is_supported_window(window_length_s)) {
        throw InvalidParameter("window length must be one of 0.05, 0.10, 0.15, 0.20 s");
    }
    const int n_cols = static_cast<int>(std::llround(window_length_s / kSampleStep));
    const double t_clear = rec.scenario.fault.t_clear_remote;
    std::size_t first = 0;
    while (first < rec.times.size() && rec.times[first] <= t_clear + 1e-9) ++first;
    if (first + static_cast<std::size_t>(n_cols) > rec.times.size()) {
        throw InvalidInput("trajectory shorter than the requested window");
    }
    std::vector<Eigen::Index> cols;
    for (int k = 0; k < n_cols; ++k) {
        const std::size_t idx = first + static_cast<std::size_t>(k);
        const double expect = t_clear + (k + 1) * kSampleStep;
        if (std::abs(rec.times[idx] - expect) > 1e-6) {
            throw InvalidInput("trajectory sampling does not match the 0.005 s window step");
        }
        cols.push_back(static_cast<Eigen::Index>(idx));
    }
    return cols;
}

namespace {

GedfSample make_sample(const TrajectoryRecord& rec, const std::vector<Eigen::Index>& cols, Variant v) {
    GedfSample s;
    s.label = rec.label;
    s.topology_id = rec.scenario.topology_id;
    s.scenario_id = rec.scenario.id;
    s.variant = v;
    s.window.t_start = rec.times[static_cast<std::size_t>(cols.front())];
    s.window.dt = kSampleStep;
    s.window.columns = static_cast<int>(cols.size());
    return s;
}

}  // namespace

GedfSample extract_window(const TrajectoryRecord& rec, const NetworkMatrices& nm, double window_length_s) {
    const auto cols = window_columns(rec, window_length_s);
    if (rec.bus_theta.rows() != nm.laplacian.rows()) throw InvalidInput("trajectory/topology bus count mismatch");
    GedfSample s = make_sample(rec, cols, Variant::Gedf);
    s.matrix.resize(rec.bus_theta.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
        const Eigen::VectorXd theta = rec.bus_theta.col(cols[k]);
        s.matrix.col(static_cast<Eigen::Index>(k)) = gedf_vector(nm, active_power(nm, theta));
    }
    normalize_max_abs(s.matrix);
    return s;
}

GedfSample extract_raw(const TrajectoryRecord& rec, double window_length_s) {
    const auto cols = window_columns(rec, window_length_s);
    GedfSample s = make_sample(rec, cols, Variant::Raw);
    s.matrix.resize(rec.bus_theta.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) s.matrix.col(static_cast<Eigen::Index>(k)) = rec.bus_theta.col(cols[k]);
    normalize_max_abs(s.matrix);
    return s;
}

// ---------------------------------------------------------------------------

DatasetSplit make_splits(const std::vector<SampleRef>& samples, const SplitFractions& fractions, std::uint64_t seed) {
    if (fractions.train < 0.0 || fractions.validation < 0.0 || fractions.train + fractions.validation > 1.0) {
        throw InvalidParameter("split fractions must be nonnegative and sum to at most 1");
    }
    std::set<std::string> topo_set;
    for (const auto& s : samples) topo_set.insert(s.topology_id);
    if (topo_set.size() < 3) throw InvalidInput("make_splits needs at least 3 distinct topologies");
    if (fractions.t2_topologies < 1 || fractions.t2_topologies >= topo_set.size()) {
        throw InvalidInput("t2_topologies must leave at least one training topology");
    }

    Rng rng(seed);
    std::vector<std::string> topos(topo_set.begin(), topo_set.end());
    shuffle(topos, rng);
    DatasetSplit out;
    for (std::size_t i = 0; i < topos.size(); ++i) {
        out.topology_role[topos[i]] = i < fractions.t2_topologies ? "t2" : "train";
    }

    std::vector<SampleRef> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<SampleRef> pool;
    for (const auto& s : sorted) {
        (out.topology_role[s.topology_id] == "t2" ? out.t2 : pool).push_back(s);
    }
    shuffle(pool, rng);
    const auto n_train = static_cast<std::size_t>(std::llround(fractions.train * static_cast<double>(pool.size())));
    const auto n_val = std::min(pool.size() - n_train,
                                static_cast<std::size_t>(std::llround(fractions.validation * static_cast<double>(pool.size()))));
    out.train.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.validation.assign(pool.begin() + static_cast<std::ptrdiff_t>(n_train),
                          pool.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    out.t1.assign(pool.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), pool.end());
    return out;
}

std::pair<std::vector<SampleRef>, std::vector<SampleRef>> stratified_fraction(const std::vector<SampleRef>& samples,
                                                                              double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw InvalidParameter("fraction must lie in (0, 1]");
    std::map<std::string, std::vector<SampleRef>> by_topo;
    for (const auto& s : samples) by_topo[s.topology_id].push_back(s);
    const auto total = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(samples.size()) + 1e-9));

    struct Share {
        std::string topo;
        std::size_t take;
        double rem;
    };
    std::vector<Share> shares;
    std::size_t assigned = 0;
    for (auto& [topo, list] : by_topo) {
        const double exact = fraction * static_cast<double>(list.size());
        const auto take = static_cast<std::size_t>(std::floor(exact + 1e-9));
        shares.push_back({topo, take, exact - static_cast<double>(take)});
        assigned += take;
    }
    std::vector<std::size_t> order(shares.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return shares[a].rem > shares[b].rem; });
    for (std::size_t k = 0; assigned < total && k < order.size(); ++k, ++assigned) shares[order[k]].take++;

    Rng rng(seed);
    std::pair<std::vector<SampleRef>, std::vector<SampleRef>> out;
    for (const Share& sh : shares) {
        auto list = by_topo[sh.topo];
        std::sort(list.begin(), list.end());
        shuffle(list, rng);
        out.first.insert(out.first.end(), list.begin(), list.begin() + static_cast<std::ptrdiff_t>(sh.take));
        out.second.insert(out.second.end(), list.begin() + static_cast<std::ptrdiff_t>(sh.take), list.end());
    }
    return out;
}

// ---------------------------------------------------------------------------

std::filesystem::path sample_path(Variant v, const SampleRef& ref) {
    return std::filesystem::path("samples") / variant_name(v) / ref.topology_id / (ref.scenario_id + ".rec");
}

std::string format_sample(const GedfSample& s, const KeyValues& extra) {
    std::ostringstream os;
    os << "# tslab feature sample\n[header]\n";
    os << "variant " << variant_name(s.variant) << '\n';
    os << "label " << s.label << '\n';
    os << "topology_id " << s.topology_id << '\n';
    os << "scenario_id " << s.scenario_id << '\n';
    os << "t_start " << format_number(s.window.t_start) << '\n';
    os << "dt " << format_number(s.window.dt) << '\n';
    os << "rows " << s.matrix.rows() << '\n';
    os << "columns " << s.matrix.cols() << '\n';
    for (const auto& [k, v] : extra) os << k << ' ' << v << '\n';
    os << "[matrix]\n";
    for (Eigen::Index r = 0; r < s.matrix.rows(); ++r) {
        for (Eigen::Index c = 0; c < s.matrix.cols(); ++c) {
            if (c) os << ' ';
            os << format_sci12(s.matrix(r, c));
        }
        os << '\n';
    }
    return os.str();
}

GedfSample parse_sample(std::string_view text) {
    GedfSample s;
    KeyValues header;
    std::vector<std::vector<double>> rows;
    std::string section;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        const std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.empty() || line.front() == '#') continue;
        if (line.front() == '[') {
            section = std::string(line.substr(1, line.find(']') - 1));
            continue;
        }
        if (section == "header") {
            const auto sp = line.find(' ');
            header.emplace_back(std::string(line.substr(0, sp)),
                                sp == std::string_view::npos ? std::string() : std::string(line.substr(sp + 1)));
        } else if (section == "matrix") {
            std::vector<double> row;
            for (auto tok : split_ws(line)) row.push_back(parse_double(tok));
            rows.push_back(std::move(row));
        }
    }
    auto get = [&](std::string_view key) -> const std::string& {
        const std::string* v = find_value(header, key);
        if (!v) throw InvalidInput("sample header lacks '" + std::string(key) + "'");
        return *v;
    };
    s.variant = parse_variant(get("variant"));
    s.label = static_cast<int>(parse_int(get("label")));
    s.topology_id = get("topology_id");
    s.scenario_id = get("scenario_id");
    s.window.t_start = parse_double(get("t_start"));
    s.window.dt = parse_double(get("dt"));
    const auto r = parse_int(get("rows"));
    const auto c = parse_int(get("columns"));
    if (static_cast<long long>(rows.size()) != r) throw InvalidInput("sample row count mismatch");
    s.matrix.resize(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        if (static_cast<long long>(rows[static_cast<std::size_t>(i)].size()) != c) throw InvalidInput("ragged sample row");
        for (Eigen::Index j = 0; j < c; ++j) s.matrix(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    s.window.columns = static_cast<int>(c);
    return s;
}

void write_sample(const std::filesystem::path& path, const GedfSample& s, const KeyValues& extra) {
    write_text_file(path, format_sample(s, extra));
}

GedfSample read_sample(const std::filesystem::path& path) { return parse_sample(read_text_file(path)); }

std::string format_manifest(const DatasetSplit& split, Variant v) {
    std::ostringstream os;
    os << "# tslab split manifest (" << variant_name(v) << ")\n";
    auto section = [&](const char* name, const std::vector<SampleRef>& refs) {
        os << '[' << name << "]\n";
        for (const auto& r : refs) os << sample_path(v, r).generic_string() << '\n';
    };
    section("train", split.train);
    section("validation", split.validation);
    section("t1", split.t1);
    section("t2", split.t2);
    os << "[topologies]\n";
    for (const auto& [topo, role] : split.topology_role) os << topo << ' ' << role << '\n';
    return os.str();
}

DatasetSplit parse_manifest(std::string_view text) {
    DatasetSplit out;
    std::string section;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        const std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.empty() || line.front() == '#') continue;
        if (line.front() == '[') {
            section = std::string(line.substr(1, line.find(']') - 1));
            continue;
        }
        if (section == "topologies") {
            const auto tok = split_ws(line);
            if (tok.size() != 2) throw InvalidInput("bad topology line in manifest");
            out.topology_role[std::string(tok[0])] = std::string(tok[1]);
            continue;
        }
        // samples/<variant>/<topology>/<scenario>.rec
        const std::filesystem::path p{std::string(line)};
        SampleRef ref{p.parent_path().filename().string(), p.stem().string()};
        if (section == "train") out.train.push_back(ref);
        else if (section == "validation") out.validation.push_back(ref);
        else if (section == "t1") out.t1.push_back(ref);
        else if (section == "t2") out.t2.push_back(ref);
        else throw InvalidInput("manifest line outside a known section");
    }
    return out;
}

}  // namespace tslab
