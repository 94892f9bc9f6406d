#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tamperlab/synth/forge.hpp"

namespace tamperlab {

struct ManifestEntry {
    std::string id;
    ManipKind kind = ManipKind::splice;
    std::uint64_t seed = 0;
    std::string split;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    std::string split;
    std::uint64_t global_seed = 0;
};

struct DataSample {
    std::string id;
    RgbImage image;
    BinaryMask mask;
    ManipKind kind = ManipKind::splice;
};

// Optional source pool for real annotated instances. When empty-handed the
// generator falls back to procedural textures.
struct PoolEntry {
    RgbImage image;
    BinaryMask instance;
};

// Pure function of (config, seed): entry i always derives seed mix(seed, i).
// Entries whose sample falls outside the fraction bounds after max_attempts
// are skipped with a warning on stderr.
std::vector<DataSample> generate_samples(const SynthConfig& cfg, std::uint64_t global_seed,
                                         const std::vector<PoolEntry>* pool = nullptr);

// generate_samples + PNG tree + manifest.jsonl under out_dir:
//   out_dir/images/<id>.png   out_dir/masks/<id>.png   out_dir/manifest.jsonl
DatasetManifest generate_dataset(const SynthConfig& cfg, std::uint64_t global_seed,
                                 const std::filesystem::path& out_dir,
                                 const std::vector<PoolEntry>* pool = nullptr);

DatasetManifest read_manifest(const std::filesystem::path& dataset_dir);
std::vector<DataSample> load_dataset(const std::filesystem::path& dataset_dir);

}  // namespace tamperlab
