#include "tslab/trajectory_io.hpp"

#include "tslab/error.hpp"

#include <sstream>

namespace tslab {

namespace {

void write_row(std::ostringstream& os, const double* v, Eigen::Index count, Eigen::Index stride) {
    for (Eigen::Index k = 0; k < count; ++k) {
        if (k) os << ' ';
        os << format_sci12(v[k * stride]);
    }
    os << '\n';
}

std::vector<double> parse_row(std::string_view line) {
    std::vector<double> out;
    for (auto tok : split_ws(line)) out.push_back(parse_double(tok));
    return out;
}

}  // namespace

std::string format_trajectory(const TrajectoryRecord& rec, const KeyValues& extra, double store_until) {
    Eigen::Index kept = 0;
    while (kept < static_cast<Eigen::Index>(rec.times.size()) &&
           rec.times[static_cast<std::size_t>(kept)] <= store_until + 1e-9) {
        ++kept;
    }
    const Scenario& s = rec.scenario;
    std::ostringstream os;
    os << "# tslab trajectory record\n[header]\n";
    os << "format 1\n";
    os << "topology_id " << s.topology_id << '\n';
    os << "scenario_id " << s.id << '\n';
    os << "seed " << s.seed << '\n';
    os << "faulted_branch " << (s.fault.faulted_branch ? std::to_string(*s.fault.faulted_branch) : "none") << '\n';
    os << "faulted_end " << (s.fault.faulted_end == FaultEnd::Near ? "near" : "remote") << '\n';
    os << "t_apply " << format_number(s.fault.t_apply) << '\n';
    os << "t_clear_near " << format_number(s.fault.t_clear_near) << '\n';
    os << "t_clear_remote " << format_number(s.fault.t_clear_remote) << '\n';
    os << "fault_shunt " << format_number(s.fault.shunt_admittance) << '\n';
    os << "label " << rec.label << '\n';
    os << "tsi " << format_number(rec.tsi) << '\n';
    os << "early_stop " << (rec.early_stop ? 1 : 0) << '\n';
    os << "horizon " << format_number(rec.horizon) << '\n';
    os << "schedule 2:0.005 10:0.01\n";
    os << "buses " << rec.bus_theta.rows() << '\n';
    os << "generators " << rec.rotor_delta.rows() << '\n';
    os << "samples " << kept << '\n';
    os << "load_scale";
    for (double v : s.load_scale) os << ' ' << format_number(v);
    os << '\n';
    for (const auto& [k, v] : extra) os << k << ' ' << v << '\n';

    os << "[times]\n";
    write_row(os, rec.times.data(), kept, 1);
    os << "[bus_theta]\n";
    for (Eigen::Index b = 0; b < rec.bus_theta.rows(); ++b) {
        write_row(os, rec.bus_theta.data() + b, kept, rec.bus_theta.rows());
    }
    os << "[rotor_delta]\n";
    for (Eigen::Index g = 0; g < rec.rotor_delta.rows(); ++g) {
        write_row(os, rec.rotor_delta.data() + g, kept, rec.rotor_delta.rows());
    }
    return os.str();
}

TrajectoryRecord parse_trajectory(std::string_view text, KeyValues* header_out) {
    KeyValues header;
    std::string section;
    std::vector<std::vector<double>> theta_rows, delta_rows;
    TrajectoryRecord rec;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
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
        } else if (section == "times") {
            rec.times = parse_row(line);
        } else if (section == "bus_theta") {
            theta_rows.push_back(parse_row(line));
        } else if (section == "rotor_delta") {
            delta_rows.push_back(parse_row(line));
        } else {
            throw InvalidInput("trajectory: data outside a known section");
        }
    }
    auto get = [&](std::string_view key) -> const std::string& {
        const std::string* v = find_value(header, key);
        if (!v) throw InvalidInput("trajectory header lacks '" + std::string(key) + "'");
        return *v;
    };
    const auto samples = static_cast<Eigen::Index>(parse_int(get("samples")));
    if (static_cast<Eigen::Index>(rec.times.size()) != samples) throw InvalidInput("trajectory: sample count mismatch");
    auto fill = [&](const std::vector<std::vector<double>>& rows, Eigen::MatrixXd& m, std::string_view what) {
        m.resize(static_cast<Eigen::Index>(rows.size()), samples);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (static_cast<Eigen::Index>(rows[r].size()) != samples) {
                throw InvalidInput("trajectory: ragged " + std::string(what) + " row");
            }
            for (Eigen::Index c = 0; c < samples; ++c) m(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
        }
    };
    fill(theta_rows, rec.bus_theta, "bus_theta");
    fill(delta_rows, rec.rotor_delta, "rotor_delta");
    if (rec.bus_theta.rows() != parse_int(get("buses")) || rec.rotor_delta.rows() != parse_int(get("generators"))) {
        throw InvalidInput("trajectory: row count mismatch");
    }

    Scenario& s = rec.scenario;
    s.topology_id = get("topology_id");
    s.id = get("scenario_id");
    s.seed = std::stoull(get("seed"));
    const std::string& fb = get("faulted_branch");
    if (fb != "none") s.fault.faulted_branch = static_cast<std::size_t>(parse_int(fb));
    s.fault.faulted_end = get("faulted_end") == "near" ? FaultEnd::Near : FaultEnd::Remote;
    s.fault.t_apply = parse_double(get("t_apply"));
    s.fault.t_clear_near = parse_double(get("t_clear_near"));
    s.fault.t_clear_remote = parse_double(get("t_clear_remote"));
    s.fault.shunt_admittance = parse_double(get("fault_shunt"));
    for (auto tok : split_ws(get("load_scale"))) s.load_scale.push_back(parse_double(tok));
    rec.label = static_cast<int>(parse_int(get("label")));
    rec.tsi = parse_double(get("tsi"));
    rec.early_stop = get("early_stop") == "1";
    rec.horizon = parse_double(get("horizon"));
    if (header_out) *header_out = std::move(header);
    return rec;
}

void write_trajectory(const std::filesystem::path& path, const TrajectoryRecord& rec, const KeyValues& extra,
                      double store_until) {
    write_text_file(path, format_trajectory(rec, extra, store_until));
}

TrajectoryRecord read_trajectory(const std::filesystem::path& path, KeyValues* header) {
    return parse_trajectory(read_text_file(path), header);
}

}  // namespace tslab
