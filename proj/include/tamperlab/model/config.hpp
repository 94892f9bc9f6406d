#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tamperlab/core/errors.hpp"

namespace tamperlab {

// Architecture hyper-parameters. The default is the desk-scale setup: small
// enough to train on a CPU in minutes while keeping the full hierarchy.
struct ModelConfig {
    int image_size = 64;                          // inputs are resized to this square
    int base_patch = 4;                           // stage-1 patch size in pixels
    std::vector<int> stage_dims = {32, 64, 128, 256};
    int blocks_per_stage = 2;
    int head_dim = 16;                            // attention head width per stage
    int mlp_ratio = 2;

    int loc_width = 64;                           // per-scale projection width in the decoder

    int cls_proj_width = 32;                      // per-scale projection width in the classifier
    int cls_patch = 16;                           // token patch size, in original-image pixels
    int cls_dim = 64;
    int cls_blocks = 5;
    int cls_heads = 4;
    bool cls_positional = false;                  // learned positions for query tokens (off: order-free)

    int stages() const { return static_cast<int>(stage_dims.size()); }

    int grid_h() const { return image_size / base_patch; }   // h_1
    int grid_w() const { return image_size / base_patch; }   // w_1

    int token_rows() const { return image_size / cls_patch; }
    int token_cols() const { return image_size / cls_patch; }

    int heads_for(int dim) const { return dim >= head_dim ? dim / head_dim : 1; }

    void validate() const {
        if (stage_dims.empty()) throw ConfigError("model: no stages");
        const int down = base_patch << (stages() - 1);
        if (image_size % down != 0)
            throw ConfigError("model: image_size must be divisible by base_patch * 2^(stages-1)");
        if (cls_patch % base_patch != 0)
            throw ConfigError("model: cls_patch must be a multiple of base_patch");
        if (image_size % cls_patch != 0)
            throw ConfigError("model: image_size must be divisible by cls_patch");
        for (int d : stage_dims)
            if (d % heads_for(d) != 0) throw ConfigError("model: stage dim not divisible by heads");
        if (cls_dim % cls_heads != 0) throw ConfigError("model: cls_dim not divisible by cls_heads");
        if (cls_blocks < 1) throw ConfigError("model: cls_blocks must be >= 1");
    }

    bool operator==(const ModelConfig&) const = default;
};

}  // namespace tamperlab
