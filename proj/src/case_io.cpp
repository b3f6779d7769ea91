#include "tslab/case_io.hpp"

#include "tslab/error.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace tslab {

namespace {

const char* bus_type_name(BusType t) {
    switch (t) {
        case BusType::Slack: return "slack";
        case BusType::PV: return "PV";
        case BusType::PQ: return "PQ";
    }
    return "PQ";
}

BusType parse_bus_type(std::string_view s) {
    if (s == "slack") return BusType::Slack;
    if (s == "PV") return BusType::PV;
    if (s == "PQ") return BusType::PQ;
    throw InvalidInput("unknown bus type '" + std::string(s) + "'");
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    return buf;
}

std::string format_sci12(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.11e", v);
    return buf;
}

double parse_double(std::string_view token) {
    double v = 0.0;
    const auto* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, v);
    if (ec != std::errc{} || ptr != end) throw InvalidInput("bad number '" + std::string(token) + "'");
    return v;
}

long long parse_int(std::string_view token) {
    long long v = 0;
    const auto* end = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(token.data(), end, v);
    if (ec != std::errc{} || ptr != end) throw InvalidInput("bad integer '" + std::string(token) + "'");
    return v;
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        const std::size_t b = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > b) out.push_back(line.substr(b, i - b));
    }
    return out;
}

const std::string* find_value(const KeyValues& kv, std::string_view key) {
    for (const auto& [k, v] : kv) {
        if (k == key) return &v;
    }
    return nullptr;
}

std::string format_case(const CaseDocument& doc) {
    const GridCase& g = doc.grid;
    std::ostringstream os;
    os << "# tslab grid case\n";
    os << "[meta]\n";
    os << "name " << g.name << "\n";
    os << "base_mva " << format_number(g.base_mva) << "\n";
    os << "frequency_hz " << format_number(g.frequency_hz) << "\n";
    os << "\n[buses]\n# id type v_set p_load q_load\n";
    for (const Bus& b : g.buses) {
        os << b.id << ' ' << bus_type_name(b.type) << ' ' << format_number(b.v_set) << ' '
           << format_number(b.p_load) << ' ' << format_number(b.q_load) << "\n";
    }
    os << "\n[branches]\n# from to x\n";
    for (const Branch& br : g.branches) {
        os << br.from << ' ' << br.to << ' ' << format_number(br.x) << "\n";
    }
    os << "\n[generators]\n# bus inertia damping xd_prime p_mech\n";
    for (const Generator& gen : g.generators) {
        os << gen.bus << ' ' << format_number(gen.inertia) << ' ' << format_number(gen.damping) << ' '
           << format_number(gen.xd_prime) << ' ' << format_number(gen.p_mech) << "\n";
    }
    if (!doc.provenance.empty()) {
        os << "\n[provenance]\n";
        for (const auto& [k, v] : doc.provenance) os << k << ' ' << v << "\n";
    }
    return os.str();
}

CaseDocument parse_case(std::string_view text) {
    CaseDocument doc;
    GridCase& g = doc.grid;
    std::string section;
    std::size_t pos = 0;
    int line_no = 0;
    bool saw_buses = false;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        const std::string_view line = trim(text.substr(pos, nl - pos));
        pos = nl + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') {
            if (nl == text.size()) break;
            continue;
        }
        try {
            if (line.front() == '[') {
                if (line.back() != ']') throw InvalidInput("bad section header");
                section = std::string(line.substr(1, line.size() - 2));
                if (section == "buses") saw_buses = true;
                continue;
            }
            const auto tok = split_ws(line);
            if (section == "meta" || section == "provenance") {
                const std::string key(tok[0]);
                const auto rest = trim(line.substr(tok[0].size()));
                if (section == "provenance") {
                    doc.provenance.emplace_back(key, std::string(rest));
                } else if (key == "name") {
                    g.name = std::string(rest);
                } else if (key == "base_mva") {
                    g.base_mva = parse_double(rest);
                } else if (key == "frequency_hz") {
                    g.frequency_hz = parse_double(rest);
                } else {
                    throw InvalidInput("unknown meta key '" + key + "'");
                }
            } else if (section == "buses") {
                if (tok.size() != 5) throw InvalidInput("bus line needs 5 fields");
                Bus b;
                b.id = static_cast<int>(parse_int(tok[0]));
                b.type = parse_bus_type(tok[1]);
                b.v_set = parse_double(tok[2]);
                b.p_load = parse_double(tok[3]);
                b.q_load = parse_double(tok[4]);
                g.buses.push_back(b);
            } else if (section == "branches") {
                if (tok.size() != 3) throw InvalidInput("branch line needs 3 fields");
                g.branches.push_back(
                    {static_cast<int>(parse_int(tok[0])), static_cast<int>(parse_int(tok[1])), parse_double(tok[2])});
            } else if (section == "generators") {
                if (tok.size() != 5) throw InvalidInput("generator line needs 5 fields");
                g.generators.push_back({static_cast<int>(parse_int(tok[0])), parse_double(tok[1]),
                                        parse_double(tok[2]), parse_double(tok[3]), parse_double(tok[4])});
            } else {
                throw InvalidInput("data outside a known section");
            }
        } catch (const InvalidInput& e) {
            throw InvalidInput("case text line " + std::to_string(line_no) + ": " + e.what());
        }
        if (nl == text.size()) break;
    }
    if (!saw_buses) throw InvalidInput("case text has no [buses] section");
    return doc;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

CaseDocument read_case_file(const std::filesystem::path& path) {
    return parse_case(read_text_file(path));
}

void write_case_file(const std::filesystem::path& path, const CaseDocument& doc) {
    write_text_file(path, format_case(doc));
}

}  // namespace tslab
