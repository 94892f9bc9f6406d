#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "tamperlab/eval/distort.hpp"
#include "tamperlab/eval/harness.hpp"
#include "tamperlab/io/checkpoint.hpp"
#include "tamperlab/io/image_io.hpp"
#include "tamperlab/io/run_config.hpp"
#include "tamperlab/synth/dataset.hpp"
#include "tamperlab/train/trainer.hpp"
#include "tamperlab/ttt/engine.hpp"

namespace fs = std::filesystem;
using namespace tamperlab;

namespace {

// Shared flags: config file, seed override, output directory. TAMPERLAB_OUT
// provides the default output root.
struct CommonArgs {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string out;

    RunConfig resolve() const {
        RunConfig rc = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
        if (seed_given) rc.apply_seed(seed);
        return rc;
    }

    fs::path out_dir(const std::string& fallback_name) const {
        if (!out.empty()) return out;
        const char* root = std::getenv("TAMPERLAB_OUT");
        return fs::path(root ? root : "out") / fallback_name;
    }
};

void add_common(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--config", a.config_path, "INI config file (defaults apply when omitted)")
        ->capture_default_str();
    cmd->add_option("--seed", a.seed, "global seed override")
        ->capture_default_str()
        ->each([&a](const std::string&) { a.seed_given = true; });
    cmd->add_option("--out", a.out, "output directory (default: $TAMPERLAB_OUT/<command>)")
        ->capture_default_str();
}

void write_summary_file(const fs::path& path, const std::vector<std::string>& lines) {
    std::ofstream f(path, std::ios::trunc);
    for (const auto& l : lines) f << l << "\n";
}

int cmd_synth(const CommonArgs& common, const std::string& split) {
    RunConfig rc = common.resolve();
    if (!split.empty()) rc.synth.split = split;
    const fs::path out = common.out_dir("dataset");
    auto manifest = generate_dataset(rc.synth, rc.seed, out);
    rc.write_echo(out);
    std::cout << "wrote " << manifest.entries.size() << " samples to " << out << "\n";
    return 0;
}

int cmd_train(const CommonArgs& common, const std::string& dataset_dir, bool resume) {
    RunConfig rc = common.resolve();
    auto data = load_dataset(dataset_dir);
    if (data.empty()) throw std::runtime_error("train: dataset is empty: " + dataset_dir);
    const fs::path out = common.out_dir("checkpoint");
    fs::create_directories(out);

    Model<float> model(rc.model, mix_seed(rc.seed, 0x111ull));
    AdamState<float> opt;
    int start_epoch = 0;
    if (resume) {
        CheckpointMeta meta;
        model = load_checkpoint(out, &opt, &meta);
        start_epoch = meta.epoch;
        std::cout << "resuming from epoch " << start_epoch << "\n";
    }
    std::ofstream log(out / "train_log.csv", resume ? std::ios::app : std::ios::trunc);
    train(model, data, rc.train, opt, start_epoch, &log);

    CheckpointMeta meta;
    meta.epoch = rc.train.epochs;
    meta.adam_step = opt.step;
    meta.rng_seed = rc.seed;
    meta.config_echo = rc.echo();
    save_checkpoint(out, model, &opt, meta);
    rc.write_echo(out);
    std::cout << "checkpoint written to " << out << "\n";
    return 0;
}

int cmd_infer(const CommonArgs& common, const std::string& checkpoint, const std::string& image_path,
              bool with_ttt) {
    RunConfig rc = common.resolve();
    Model<float> model = load_checkpoint(checkpoint);
    RgbImage image = read_png(image_path);
    const fs::path out = common.out_dir("infer");
    fs::create_directories(out);

    SoftMask mask;
    if (with_ttt) {
        auto [m, rep] = predict_with_ttt(image, model, rc.ttt);
        mask = m;
        std::cout << (rep.skipped ? "adaptation skipped (no foreground tokens)\n" : "adapted\n");
    } else {
        mask = model.predict_mask(image);
    }
    write_softmask_png(out / "mask.png", mask);
    write_png(out / "overlay.png", render_overlay(image, mask));
    rc.write_echo(out);
    std::cout << "mask and overlay written to " << out << "\n";
    return 0;
}

void write_ttt_reports(const fs::path& dir, const std::vector<DataSample>& data,
                       const TTTEvalResult& ttt) {
    fs::create_directories(dir);
    std::ofstream sum(dir / "ttt_summary.csv", std::ios::trunc);
    // wall time stays in timing.log: CSV artifacts are byte-reproducible
    std::ofstream timing(dir / "timing.log", std::ios::trunc);
    sum << "id,skipped,passes,live_token_peak,ssl_first,ssl_last\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& rep = ttt.reports[i];
        std::ofstream f(dir / (data[i].id + "_ttt.csv"), std::ios::trunc);
        f << "step,ssl_loss,mean_y,passes\n";
        for (std::size_t k = 0; k < rep.ssl_loss.size(); ++k)
            f << k << "," << rep.ssl_loss[k] << "," << rep.mean_y[k] << "," << rep.encoder_passes
              << "\n";
        sum << data[i].id << "," << (rep.skipped ? 1 : 0) << "," << rep.encoder_passes << ","
            << rep.live_token_peak << ","
            << (rep.ssl_loss.empty() ? 0.0 : rep.ssl_loss.front()) << ","
            << (rep.ssl_loss.empty() ? 0.0 : rep.ssl_loss.back()) << "\n";
        timing << data[i].id << " elapsed_ms=" << rep.elapsed_ms << "\n";
    }
}

int cmd_ttt_eval(const CommonArgs& common, const std::string& checkpoint,
                 const std::string& dataset_dir) {
    RunConfig rc = common.resolve();
    Model<float> model = load_checkpoint(checkpoint);
    auto data = load_dataset(dataset_dir);
    if (data.empty()) throw std::runtime_error("ttt-eval: dataset is empty: " + dataset_dir);
    const fs::path out = common.out_dir("ttt_eval");
    fs::create_directories(out);

    auto plain_rows = evaluate_plain(model, data, rc.eval_threads);
    write_eval_csv(out / "eval_no_ttt.csv", plain_rows);
    const EvalSummary plain = summarize(plain_rows);

    TTTConfig tcfg = rc.ttt;
    tcfg.record_curve = true;
    auto ttt = evaluate_with_ttt(model, data, tcfg, rc.eval_threads);
    write_eval_csv(out / "eval_with_ttt.csv", ttt.rows);
    write_ttt_reports(out / "reports", data, ttt);
    const EvalSummary adapted = summarize(ttt.rows);

    {
        std::ofstream f(out / "ttt_curve.csv", std::ios::trunc);
        f << "step,mean_f_fix\n";
        for (std::size_t k = 0; k < ttt.curve_mean_f_fix.size(); ++k)
            f << k << "," << ttt.curve_mean_f_fix[k] << "\n";
    }
    std::vector<std::string> lines{summary_table_header(),
                                   format_summary_line("no_ttt", plain),
                                   format_summary_line(ttt_strategy_name(tcfg.strategy), adapted)};
    write_summary_file(out / "summary.txt", lines);
    rc.write_echo(out);
    for (const auto& l : lines) std::cout << l << "\n";
    return 0;
}

int cmd_distort_eval(const CommonArgs& common, const std::string& checkpoint,
                     const std::string& dataset_dir) {
    RunConfig rc = common.resolve();
    Model<float> model = load_checkpoint(checkpoint);
    auto data = load_dataset(dataset_dir);
    if (data.empty()) throw std::runtime_error("distort-eval: dataset is empty: " + dataset_dir);
    const fs::path out = common.out_dir("distort_eval");
    fs::create_directories(out);

    auto clean_rows = evaluate_plain(model, data, rc.eval_threads);
    write_eval_csv(out / "eval_clean.csv", clean_rows);
    const EvalSummary clean = summarize(clean_rows);

    std::vector<std::string> lines{summary_table_header(), format_summary_line("clean", clean)};
    std::ofstream delta(out / "delta_vs_clean.csv", std::ios::trunc);
    delta << "setting,mean_f_fix,delta_f_fix\n";
    delta << "clean," << clean.mean_f_fix << ",0\n";
    for (const auto& d : robustness_settings()) {
        std::vector<DataSample> distorted = data;
        for (std::size_t i = 0; i < distorted.size(); ++i)
            distorted[i].image =
                distort(data[i].image, d, mix_seed(rc.seed, static_cast<std::uint64_t>(i)));
        auto rows = evaluate_plain(model, distorted, rc.eval_threads);
        write_eval_csv(out / ("eval_" + distortion_name(d) + ".csv"), rows);
        const EvalSummary s = summarize(rows);
        lines.push_back(format_summary_line(distortion_name(d), s));
        delta << distortion_name(d) << "," << s.mean_f_fix << ","
              << s.mean_f_fix - clean.mean_f_fix << "\n";
    }
    write_summary_file(out / "summary.txt", lines);
    rc.write_echo(out);
    for (const auto& l : lines) std::cout << l << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tamperlab: image-forgery localization with per-sample test-time training"};
    app.require_subcommand(1);

    CommonArgs synth_args, train_args, infer_args, ttt_args, distort_args;
    std::string split, dataset_dir, checkpoint, image_path;
    bool resume = false, with_ttt = false;

    auto* synth = app.add_subcommand("synth", "generate a synthetic forgery dataset");
    add_common(synth, synth_args);
    synth->add_option("--split", split, "manifest split tag (overrides config)")
        ->capture_default_str();

    auto* train_cmd = app.add_subcommand("train", "training-time training on a dataset");
    add_common(train_cmd, train_args);
    train_cmd->add_option("--dataset", dataset_dir, "dataset directory (from synth)")->required();
    train_cmd->add_flag("--resume", resume, "continue from the checkpoint in --out");

    auto* infer = app.add_subcommand("infer", "predict a forgery mask for one image");
    add_common(infer, infer_args);
    infer->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
    infer->add_option("--image", image_path, "input image (PNG)")->required();
    infer->add_flag("--ttt", with_ttt, "adapt to the image before predicting");

    auto* ttt_eval = app.add_subcommand("ttt-eval", "evaluate with and without adaptation");
    add_common(ttt_eval, ttt_args);
    ttt_eval->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
    ttt_eval->add_option("--dataset", dataset_dir, "dataset directory")->required();

    auto* distort_eval = app.add_subcommand("distort-eval", "robustness table over distortions");
    add_common(distort_eval, distort_args);
    distort_eval->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
    distort_eval->add_option("--dataset", dataset_dir, "dataset directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(synth_args, split);
        if (train_cmd->parsed()) return cmd_train(train_args, dataset_dir, resume);
        if (infer->parsed()) return cmd_infer(infer_args, checkpoint, image_path, with_ttt);
        if (ttt_eval->parsed()) return cmd_ttt_eval(ttt_args, checkpoint, dataset_dir);
        if (distort_eval->parsed()) return cmd_distort_eval(distort_args, checkpoint, dataset_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
