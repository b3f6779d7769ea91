#pragma once

#include "tslab/case_io.hpp"
#include "tslab/learn/model.hpp"
#include "tslab/learn/train.hpp"

#include <filesystem>
#include <string>

namespace tslab::learn {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    EncoderParams encoder;
    ClassifierParams classifier;
    TrainConfig config;
    KeyValues provenance;
};

/// Text header (version, input shape, config, provenance, one line per
/// parameter with its shape) terminated by "data <count>", then the
/// parameters as little-endian float64 in declared order.
std::string format_checkpoint(const Checkpoint& c);

/// Throws InvalidInput on a malformed file or when the stored shapes do not
/// match the architecture for the recorded input size.
Checkpoint parse_checkpoint(std::string_view bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace tslab::learn
