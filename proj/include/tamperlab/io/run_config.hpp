#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "tamperlab/io/config_file.hpp"
#include "tamperlab/model/config.hpp"
#include "tamperlab/synth/forge.hpp"
#include "tamperlab/train/trainer.hpp"
#include "tamperlab/ttt/engine.hpp"

namespace tamperlab {

// Resolved run configuration: struct defaults, overlaid by the config file,
// overlaid by CLI overrides. The resolved form is echoed verbatim into every
// output directory.
struct RunConfig {
    SynthConfig synth;
    ModelConfig model;
    TrainConfig train;
    TTTConfig ttt;
    int eval_threads = 2;
    std::uint64_t seed = 0;

    // load from an optional file; empty path = defaults only
    static RunConfig load(const std::filesystem::path& file);
    static RunConfig from_config(const ConfigFile& cfg);

    // apply the global seed to the per-engine seeds
    void apply_seed(std::uint64_t s);

    ConfigFile to_config_file() const;
    std::string echo() const { return to_config_file().dump(); }
    void write_echo(const std::filesystem::path& dir) const;
};

}  // namespace tamperlab
