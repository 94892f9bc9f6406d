#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "tamperlab/model/model.hpp"
#include "tamperlab/train/adam.hpp"

namespace tamperlab {

// Persisted training state beyond the tensors themselves.
struct CheckpointMeta {
    int epoch = 0;
    long adam_step = 0;
    std::uint64_t rng_seed = 0;
    std::uint64_t rng_counter = 0;
    std::string config_echo;  // resolved run config, stored verbatim
};

// Checkpoint directory layout:
//   manifest.json  - config, tensor table (name/shape/offset/bytes), dtype,
//                    content hash of the blob, training metadata
//   params.bin     - raw little-endian float32 tensor data, in table order
//
// Round-trips are bit-exact: save(load(dir)) reproduces the blob byte for
// byte, and resuming from a checkpoint continues the exact float32 stream.
void save_checkpoint(const std::filesystem::path& dir, Model<float>& model,
                     const AdamState<float>* opt, const CheckpointMeta& meta);

Model<float> load_checkpoint(const std::filesystem::path& dir, AdamState<float>* opt = nullptr,
                             CheckpointMeta* meta = nullptr);

std::uint64_t fnv1a64(const void* data, std::size_t bytes);

}  // namespace tamperlab
