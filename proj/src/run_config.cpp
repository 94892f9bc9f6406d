#include "tamperlab/io/run_config.hpp"

#include <fstream>
#include <sstream>

#include "tamperlab/core/errors.hpp"

namespace tamperlab {

namespace {

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stoi(item));
    }
    return out;
}

std::string join_int_list(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

}  // namespace

RunConfig RunConfig::load(const std::filesystem::path& file) {
    if (file.empty()) return RunConfig{};
    return from_config(ConfigFile::parse_file(file));
}

RunConfig RunConfig::from_config(const ConfigFile& c) {
    RunConfig r;
    r.seed = c.get_u64("run", "seed", r.seed);

    auto& s = r.synth;
    s.width = c.get_int("synth", "width", s.width);
    s.height = c.get_int("synth", "height", s.height);
    s.count_splice = c.get_int("synth", "count_splice", s.count_splice);
    s.count_copy_move = c.get_int("synth", "count_copy_move", s.count_copy_move);
    s.count_removal = c.get_int("synth", "count_removal", s.count_removal);
    s.min_fraction = c.get_double("synth", "min_fraction", s.min_fraction);
    s.max_fraction = c.get_double("synth", "max_fraction", s.max_fraction);
    s.target_min_fraction = c.get_double("synth", "target_min_fraction", s.target_min_fraction);
    s.target_max_fraction = c.get_double("synth", "target_max_fraction", s.target_max_fraction);
    s.max_attempts = c.get_int("synth", "max_attempts", s.max_attempts);
    s.feather = c.get_bool("synth", "feather", s.feather);
    s.split = c.get("synth", "split", s.split);
    const std::string rm = c.get("synth", "removal_method", "mean_fill");
    if (rm == "mean_fill") s.removal_method = RemovalMethod::mean_fill;
    else if (rm == "diffusion_fill") s.removal_method = RemovalMethod::diffusion_fill;
    else throw ConfigError("synth.removal_method: expected mean_fill or diffusion_fill");

    auto& m = r.model;
    m.image_size = c.get_int("model", "image_size", m.image_size);
    m.base_patch = c.get_int("model", "base_patch", m.base_patch);
    if (c.has("model", "stage_dims")) m.stage_dims = parse_int_list(c.get("model", "stage_dims", ""));
    m.blocks_per_stage = c.get_int("model", "blocks_per_stage", m.blocks_per_stage);
    m.head_dim = c.get_int("model", "head_dim", m.head_dim);
    m.mlp_ratio = c.get_int("model", "mlp_ratio", m.mlp_ratio);
    m.loc_width = c.get_int("model", "loc_width", m.loc_width);
    m.cls_proj_width = c.get_int("model", "cls_proj_width", m.cls_proj_width);
    m.cls_patch = c.get_int("model", "cls_patch", m.cls_patch);
    m.cls_dim = c.get_int("model", "cls_dim", m.cls_dim);
    m.cls_blocks = c.get_int("model", "cls_blocks", m.cls_blocks);
    m.cls_heads = c.get_int("model", "cls_heads", m.cls_heads);
    m.cls_positional = c.get_bool("model", "cls_positional", m.cls_positional);

    auto& t = r.train;
    t.epochs = c.get_int("train", "epochs", t.epochs);
    t.batch_size = c.get_int("train", "batch_size", t.batch_size);
    t.base_lr = c.get_double("train", "base_lr", t.base_lr);
    t.lr_decay = c.get_double("train", "lr_decay", t.lr_decay);
    t.lambda_ssl = c.get_double("train", "lambda_ssl", t.lambda_ssl);
    t.grad_clip = c.get_double("train", "grad_clip", t.grad_clip);
    t.dropout_ratio = c.get_double("train", "dropout_ratio", t.dropout_ratio);
    t.aug_hflip = c.get_bool("train", "aug_hflip", t.aug_hflip);
    t.aug_crop = c.get_bool("train", "aug_crop", t.aug_crop);
    t.crop_min_scale = c.get_double("train", "crop_min_scale", t.crop_min_scale);
    t.threads = c.get_int("train", "threads", t.threads);

    auto& k = r.ttt;
    k.steps = c.get_int("ttt", "steps", k.steps);
    k.lr = c.get_double("ttt", "lr", k.lr);
    k.dropout_ratio = c.get_double("ttt", "dropout_ratio", k.dropout_ratio);
    k.query_batch = c.get_int("ttt", "query_batch", k.query_batch);
    k.grad_clip = c.get_double("ttt", "grad_clip", k.grad_clip);
    k.record_curve = c.get_bool("ttt", "record_curve", k.record_curve);
    if (c.has("ttt", "strategy")) k.strategy = ttt_strategy_from(c.get("ttt", "strategy", ""));
    const std::string refresh = c.get("ttt", "mask_refresh", "initial_mask");
    if (refresh == "initial_mask") k.refresh = MaskRefresh::initial_mask;
    else if (refresh == "per_step") k.refresh = MaskRefresh::per_step;
    else throw ConfigError("ttt.mask_refresh: expected initial_mask or per_step");
    const std::string qm = c.get("ttt", "query_mode", "manipulated_only");
    if (qm == "manipulated_only") k.query_mode = QueryMode::manipulated_only;
    else if (qm == "authentic_only") k.query_mode = QueryMode::authentic_only;
    else if (qm == "both") k.query_mode = QueryMode::both;
    else throw ConfigError("ttt.query_mode: expected manipulated_only, authentic_only or both");

    r.eval_threads = c.get_int("eval", "threads", r.eval_threads);
    r.apply_seed(r.seed);
    return r;
}

void RunConfig::apply_seed(std::uint64_t s) {
    seed = s;
    train.seed = s;
    ttt.seed = mix_seed(s, 0x77Aull);
}

ConfigFile RunConfig::to_config_file() const {
    ConfigFile c;
    c.set("run", "seed", std::to_string(seed));

    c.set("synth", "width", std::to_string(synth.width));
    c.set("synth", "height", std::to_string(synth.height));
    c.set("synth", "count_splice", std::to_string(synth.count_splice));
    c.set("synth", "count_copy_move", std::to_string(synth.count_copy_move));
    c.set("synth", "count_removal", std::to_string(synth.count_removal));
    c.set("synth", "min_fraction", std::to_string(synth.min_fraction));
    c.set("synth", "max_fraction", std::to_string(synth.max_fraction));
    c.set("synth", "target_min_fraction", std::to_string(synth.target_min_fraction));
    c.set("synth", "target_max_fraction", std::to_string(synth.target_max_fraction));
    c.set("synth", "max_attempts", std::to_string(synth.max_attempts));
    c.set("synth", "feather", synth.feather ? "true" : "false");
    c.set("synth", "removal_method",
          synth.removal_method == RemovalMethod::mean_fill ? "mean_fill" : "diffusion_fill");
    c.set("synth", "split", synth.split);

    c.set("model", "image_size", std::to_string(model.image_size));
    c.set("model", "base_patch", std::to_string(model.base_patch));
    c.set("model", "stage_dims", join_int_list(model.stage_dims));
    c.set("model", "blocks_per_stage", std::to_string(model.blocks_per_stage));
    c.set("model", "head_dim", std::to_string(model.head_dim));
    c.set("model", "mlp_ratio", std::to_string(model.mlp_ratio));
    c.set("model", "loc_width", std::to_string(model.loc_width));
    c.set("model", "cls_proj_width", std::to_string(model.cls_proj_width));
    c.set("model", "cls_patch", std::to_string(model.cls_patch));
    c.set("model", "cls_dim", std::to_string(model.cls_dim));
    c.set("model", "cls_blocks", std::to_string(model.cls_blocks));
    c.set("model", "cls_heads", std::to_string(model.cls_heads));
    c.set("model", "cls_positional", model.cls_positional ? "true" : "false");

    c.set("train", "epochs", std::to_string(train.epochs));
    c.set("train", "batch_size", std::to_string(train.batch_size));
    c.set("train", "base_lr", std::to_string(train.base_lr));
    c.set("train", "lr_decay", std::to_string(train.lr_decay));
    c.set("train", "lambda_ssl", std::to_string(train.lambda_ssl));
    c.set("train", "grad_clip", std::to_string(train.grad_clip));
    c.set("train", "dropout_ratio", std::to_string(train.dropout_ratio));
    c.set("train", "aug_hflip", train.aug_hflip ? "true" : "false");
    c.set("train", "aug_crop", train.aug_crop ? "true" : "false");
    c.set("train", "crop_min_scale", std::to_string(train.crop_min_scale));
    c.set("train", "threads", std::to_string(train.threads));

    c.set("ttt", "steps", std::to_string(ttt.steps));
    c.set("ttt", "lr", std::to_string(ttt.lr));
    c.set("ttt", "dropout_ratio", std::to_string(ttt.dropout_ratio));
    c.set("ttt", "query_batch", std::to_string(ttt.query_batch));
    c.set("ttt", "strategy", ttt_strategy_name(ttt.strategy));
    c.set("ttt", "mask_refresh",
          ttt.refresh == MaskRefresh::initial_mask ? "initial_mask" : "per_step");
    c.set("ttt", "query_mode", ttt.query_mode == QueryMode::manipulated_only ? "manipulated_only"
                               : ttt.query_mode == QueryMode::authentic_only ? "authentic_only"
                                                                             : "both");
    c.set("ttt", "grad_clip", std::to_string(ttt.grad_clip));
    c.set("ttt", "record_curve", ttt.record_curve ? "true" : "false");

    c.set("eval", "threads", std::to_string(eval_threads));
    return c;
}

void RunConfig::write_echo(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    std::ofstream f(dir / "resolved_config.ini", std::ios::trunc);
    f << echo();
}

}  // namespace tamperlab
