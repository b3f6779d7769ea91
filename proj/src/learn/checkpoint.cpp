#include "tslab/learn/checkpoint.hpp"

#include "tslab/error.hpp"

#include <bit>
#include <cstring>
#include <sstream>

namespace tslab::learn {

namespace {

void put_le(std::string& out, double v) {
    std::uint64_t u = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
}

double get_le(const unsigned char* p) {
    std::uint64_t u = 0;
    for (int i = 7; i >= 0; --i) u = (u << 8) | p[i];
    return std::bit_cast<double>(u);
}

std::vector<const Parameter*> all_params(const Checkpoint& c) {
    auto v = c.encoder.parameters();
    for (const Parameter* p : c.classifier.parameters()) v.push_back(p);
    return v;
}

std::vector<Parameter*> all_params(Checkpoint& c) {
    auto v = c.encoder.parameters();
    for (Parameter* p : c.classifier.parameters()) v.push_back(p);
    return v;
}

std::string next_line(std::string_view bytes, std::size_t& pos) {
    const std::size_t end = bytes.find('\n', pos);
    if (end == std::string_view::npos) throw InvalidInput("checkpoint: truncated header");
    std::string line(bytes.substr(pos, end - pos));
    pos = end + 1;
    return line;
}

}  // namespace

std::string format_checkpoint(const Checkpoint& c) {
    std::ostringstream os;
    os << "tslab-checkpoint " << kCheckpointVersion << '\n';
    os << "input " << c.encoder.rows << ' ' << c.encoder.cols << '\n';
    os << "embedding " << kEmbeddingDim << '\n';
    os << "config temperature " << format_number(c.config.temperature) << '\n';
    os << "config learning_rate " << format_number(c.config.learning_rate) << '\n';
    os << "config batch_size " << c.config.batch_size << '\n';
    os << "config epochs " << c.config.epochs << '\n';
    os << "config classifier_epochs " << c.config.classifier_epochs << '\n';
    os << "config seed " << c.config.seed << '\n';
    os << "config augment " << (c.config.augment ? 1 : 0) << '\n';
    os << "config select_best " << (c.config.select_best ? 1 : 0) << '\n';
    for (const auto& [k, v] : c.provenance) os << "meta " << k << ' ' << v << '\n';
    std::size_t count = 0;
    for (const Parameter* p : all_params(c)) {
        os << "param " << p->name;
        for (int d : p->value.shape) os << ' ' << d;
        os << '\n';
        count += p->value.size();
    }
    os << "data " << count << '\n';
    std::string out = os.str();
    out.reserve(out.size() + 8 * count);
    for (const Parameter* p : all_params(c)) {
        for (double v : p->value.data) put_le(out, v);
    }
    return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
    std::size_t pos = 0;
    {
        const std::string line = next_line(bytes, pos);
        const auto f = split_ws(line);
        if (f.size() != 2 || f[0] != "tslab-checkpoint") throw InvalidInput("checkpoint: bad magic");
        if (parse_int(f[1]) != kCheckpointVersion) throw InvalidInput("checkpoint: unsupported version");
    }
    int rows = -1, cols = -1;
    Checkpoint c;
    std::vector<std::pair<std::string, std::vector<int>>> declared;
    std::size_t count = 0;
    bool have_data = false;
    while (!have_data) {
        const std::string line = next_line(bytes, pos);
        const auto f = split_ws(line);
        if (f.empty()) continue;
        if (f[0] == "input" && f.size() == 3) {
            rows = static_cast<int>(parse_int(f[1]));
            cols = static_cast<int>(parse_int(f[2]));
        } else if (f[0] == "embedding" && f.size() == 2) {
            if (parse_int(f[1]) != kEmbeddingDim) throw InvalidInput("checkpoint: embedding size mismatch");
        } else if (f[0] == "config" && f.size() == 3) {
            const std::string_view k = f[1];
            if (k == "temperature") c.config.temperature = parse_double(f[2]);
            else if (k == "learning_rate") c.config.learning_rate = parse_double(f[2]);
            else if (k == "batch_size") c.config.batch_size = static_cast<std::size_t>(parse_int(f[2]));
            else if (k == "epochs") c.config.epochs = static_cast<int>(parse_int(f[2]));
            else if (k == "classifier_epochs") c.config.classifier_epochs = static_cast<int>(parse_int(f[2]));
            else if (k == "seed") c.config.seed = std::stoull(std::string(f[2]));
            else if (k == "augment") c.config.augment = parse_int(f[2]) != 0;
            else if (k == "select_best") c.config.select_best = parse_int(f[2]) != 0;
            else throw InvalidInput("checkpoint: unknown config key " + std::string(k));
        } else if (f[0] == "meta" && f.size() >= 2) {
            const auto at = static_cast<std::size_t>(f[1].data() - line.data()) + f[1].size();
            c.provenance.emplace_back(std::string(f[1]), at < line.size() ? line.substr(at + 1) : std::string());
        } else if (f[0] == "param" && f.size() >= 2) {
            std::vector<int> shape;
            for (std::size_t i = 2; i < f.size(); ++i) shape.push_back(static_cast<int>(parse_int(f[i])));
            declared.emplace_back(std::string(f[1]), std::move(shape));
        } else if (f[0] == "data" && f.size() == 2) {
            count = static_cast<std::size_t>(parse_int(f[1]));
            have_data = true;
        } else {
            throw InvalidInput("checkpoint: unexpected header line '" + line + "'");
        }
    }
    if (rows < 0 || cols < 0) throw InvalidInput("checkpoint: missing input shape");

    c.encoder = init_encoder(rows, cols, 0);
    c.classifier = init_classifier(0);
    const auto params = all_params(c);
    if (declared.size() != params.size()) throw InvalidInput("checkpoint: parameter count does not match architecture");
    std::size_t expected = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (declared[i].first != params[i]->name || declared[i].second != params[i]->value.shape) {
            throw InvalidInput("checkpoint: parameter '" + declared[i].first + "' does not match architecture");
        }
        expected += params[i]->value.size();
    }
    if (count != expected || bytes.size() - pos != 8 * count) throw InvalidInput("checkpoint: data block size mismatch");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
    for (Parameter* q : params) {
        for (double& v : q->value.data) {
            v = get_le(p);
            p += 8;
        }
    }
    return c;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
    write_text_file(path, format_checkpoint(c));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(read_text_file(path)); }

}  // namespace tslab::learn
