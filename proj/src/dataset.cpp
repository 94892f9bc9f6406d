#include "tamperlab/synth/dataset.hpp"

#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "tamperlab/core/errors.hpp"
#include "tamperlab/io/image_io.hpp"

namespace tamperlab {

using nlohmann::json;

namespace {

std::string entry_id(int index, ManipKind kind) {
    std::ostringstream ss;
    ss.width(5);
    ss.fill('0');
    ss << index;
    return ss.str() + "_" + manip_kind_name(kind);
}

// Pool-backed variant of make_sample: instances come from annotated sources.
std::optional<ForgerySample> make_pool_sample(ManipKind kind, const SynthConfig& cfg,
                                              std::uint64_t seed,
                                              const std::vector<PoolEntry>& pool) {
    CompositeOptions copt{cfg.feather};
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        const std::uint64_t s = mix_seed(seed, static_cast<std::uint64_t>(attempt));
        Prng rng(mix_seed(s, 1));
        const auto pick = [&rng, &pool]() -> const PoolEntry& {
            return pool[static_cast<std::size_t>(rng.uniform_int(pool.size()))];
        };
        try {
            const PoolEntry& src = pick();
            RgbImage donor = resize_bilinear(src.image, cfg.height, cfg.width);
            BinaryMask inst = resize_nearest(src.instance, cfg.height, cfg.width);
            ForgerySample sample;
            switch (kind) {
                case ManipKind::splice: {
                    RgbImage host = resize_bilinear(pick().image, cfg.height, cfg.width);
                    sample = splice(donor, inst, host, 0, 0, 1.0, seed, copt);
                    break;
                }
                case ManipKind::copy_move: {
                    const int oy = static_cast<int>(rng.uniform_int(
                                       static_cast<std::uint64_t>(cfg.height))) - cfg.height / 2;
                    const int ox = static_cast<int>(rng.uniform_int(
                                       static_cast<std::uint64_t>(cfg.width))) - cfg.width / 2;
                    sample = copy_move(donor, inst, oy, ox, seed, copt);
                    break;
                }
                case ManipKind::removal:
                    sample = remove(donor, inst, cfg.removal_method, seed);
                    break;
            }
            sample.provenance = "pool";
            const double f = sample.mask.fraction();
            if (f >= cfg.min_fraction && f <= cfg.max_fraction) return sample;
        } catch (const InvalidInstanceError&) {
        } catch (const RejectedPlacementError&) {
        } catch (const DegenerateOffsetError&) {
        }
    }
    return std::nullopt;
}

}  // namespace

std::vector<DataSample> generate_samples(const SynthConfig& cfg, std::uint64_t global_seed,
                                         const std::vector<PoolEntry>* pool) {
    if (pool && pool->empty())
        throw ExhaustedPoolError("generate: supplied source pool is empty");
    std::vector<std::pair<int, ManipKind>> slots;
    for (int i = 0; i < cfg.count_splice; ++i)
        slots.emplace_back(static_cast<int>(slots.size()), ManipKind::splice);
    for (int i = 0; i < cfg.count_copy_move; ++i)
        slots.emplace_back(static_cast<int>(slots.size()), ManipKind::copy_move);
    for (int i = 0; i < cfg.count_removal; ++i)
        slots.emplace_back(static_cast<int>(slots.size()), ManipKind::removal);

    std::vector<DataSample> out;
    out.reserve(slots.size());
    for (const auto& [index, kind] : slots) {
        const std::uint64_t seed = mix_seed(global_seed, static_cast<std::uint64_t>(index));
        std::optional<ForgerySample> s =
            pool ? make_pool_sample(kind, cfg, seed, *pool) : make_sample(kind, cfg, seed);
        if (!s) {
            std::cerr << "[synth] warning: entry " << index << " (" << manip_kind_name(kind)
                      << ") skipped after " << cfg.max_attempts << " attempts\n";
            continue;
        }
        DataSample d;
        d.id = entry_id(index, kind);
        d.image = std::move(s->image);
        d.mask = std::move(s->mask);
        d.kind = kind;
        out.push_back(std::move(d));
    }
    return out;
}

DatasetManifest generate_dataset(const SynthConfig& cfg, std::uint64_t global_seed,
                                 const std::filesystem::path& out_dir,
                                 const std::vector<PoolEntry>* pool) {
    namespace fs = std::filesystem;
    auto samples = generate_samples(cfg, global_seed, pool);
    fs::create_directories(out_dir / "images");
    fs::create_directories(out_dir / "masks");

    DatasetManifest manifest;
    manifest.split = cfg.split;
    manifest.global_seed = global_seed;

    std::ofstream mf(out_dir / "manifest.jsonl", std::ios::trunc);
    if (!mf) throw std::runtime_error("cannot write manifest in " + out_dir.string());
    for (const auto& s : samples) {
        write_png(out_dir / "images" / (s.id + ".png"), s.image);
        write_mask_png(out_dir / "masks" / (s.id + ".png"), s.mask);
        const std::uint64_t seed =
            mix_seed(global_seed, static_cast<std::uint64_t>(std::stoi(s.id.substr(0, 5))));
        json line{{"id", s.id},
                  {"kind", manip_kind_name(s.kind)},
                  {"seed", std::to_string(seed)},
                  {"split", cfg.split}};
        mf << line.dump() << "\n";
        manifest.entries.push_back({s.id, s.kind, seed, cfg.split});
    }
    return manifest;
}

DatasetManifest read_manifest(const std::filesystem::path& dataset_dir) {
    std::ifstream f(dataset_dir / "manifest.jsonl");
    if (!f)
        throw std::runtime_error("missing manifest.jsonl in " + dataset_dir.string());
    DatasetManifest m;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        ManifestEntry e;
        e.id = j.at("id").get<std::string>();
        e.kind = manip_kind_from(j.at("kind").get<std::string>());
        e.seed = std::stoull(j.at("seed").get<std::string>());
        e.split = j.value("split", "");
        if (m.split.empty()) m.split = e.split;
        m.entries.push_back(std::move(e));
    }
    return m;
}

std::vector<DataSample> load_dataset(const std::filesystem::path& dataset_dir) {
    DatasetManifest m = read_manifest(dataset_dir);
    std::vector<DataSample> out;
    out.reserve(m.entries.size());
    for (const auto& e : m.entries) {
        DataSample d;
        d.id = e.id;
        d.kind = e.kind;
        d.image = read_png(dataset_dir / "images" / (e.id + ".png"));
        d.mask = read_mask_png(dataset_dir / "masks" / (e.id + ".png"));
        if (d.image.h != d.mask.h || d.image.w != d.mask.w)
            throw ShapeError("dataset: image/mask dims differ for " + e.id);
        out.push_back(std::move(d));
    }
    return out;
}

}  // namespace tamperlab
