#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsm/model.hpp"

namespace tsm {

// Self-describing model container: "TSMC" magic, a version byte, the config
// block, then every named parameter as a shape header followed by
// little-endian 64-bit floats in row-major order. Re-serializing an
// unmodified model reproduces the bytes exactly.
std::vector<std::uint8_t> serialize_checkpoint(const HeadModel& model);
HeadModel parse_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const HeadModel& model, const std::string& path);
HeadModel load_checkpoint(const std::string& path);

}  // namespace tsm
