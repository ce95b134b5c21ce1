#pragma once

#include <string>
#include <vector>

#include "tsm/synthetic.hpp"
#include "tsm/videomap.hpp"

namespace tsm {

// Feature file format: magic "VMAP", version byte 1, unsigned 32-bit
// little-endian T, L and class label, then T*L little-endian 32-bit floats
// in frame-major order. A relevance mask, when present, lives in a sidecar
// "<file>.mask" of T space-separated 0/1 flags.
std::vector<std::uint8_t> serialize_sequence(const FeatureSequence& seq);
FeatureSequence parse_sequence(const std::vector<std::uint8_t>& bytes);

void write_sequence_file(const FeatureSequence& seq, const std::string& path);
FeatureSequence read_sequence_file(const std::string& path);

// A dataset directory holds one sequence per file plus "manifest.txt" with a
// "<relative path> <split>" line per sequence.
void write_dataset_dir(const TaskData& data, const std::string& dir, bool force);

// split filter: "train", "test" or "" for everything
std::vector<FeatureSequence> read_dataset_dir(const std::string& dir,
                                              const std::string& split);

}  // namespace tsm
