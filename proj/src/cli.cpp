#include "lformer/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "lformer/config_file.hpp"
#include "lformer/data.hpp"
#include "lformer/metrics.hpp"
#include "lformer/model_io.hpp"
#include "lformer/profiler.hpp"
#include "lformer/train.hpp"

namespace fs = std::filesystem;

namespace lformer::cli {

namespace {

std::vector<train::TrainItem<float>> load_split_items(const std::string& data_dir,
                                                      const data::DatasetManifest& manifest,
                                                      const std::string& split) {
    const data::SplitInfo& info = manifest.at(split);
    if (!info.has_gt) throw DataError("split '" + split + "' has no ground truth");
    std::vector<train::TrainItem<float>> items;
    for (const auto& id : info.ids) {
        data::Sample s = data::load_sample(data_dir, split, id, true);
        items.push_back({s.ms_up, s.pan, s.gt});
    }
    return items;
}

std::string checkpoint_dir_from(const std::string& path) {
    // accepts a checkpoint directory, its manifest.txt, or a training output
    // directory containing a "latest" pointer
    fs::path p(path);
    if (fs::is_regular_file(p) && p.filename() == "manifest.txt") return p.parent_path().string();
    if (fs::is_directory(p)) {
        if (fs::exists(p / "manifest.txt")) return p.string();
        if (fs::exists(p / "latest")) {
            std::ifstream f(p / "latest");
            std::string name;
            std::getline(f, name);
            if (!name.empty() && fs::exists(p / name / "manifest.txt")) return (p / name).string();
        }
    }
    throw DataError("no checkpoint found at " + path);
}

int cmd_gen_data(const std::string& out, std::uint64_t seed, std::size_t n_train,
                 std::size_t n_val, std::size_t n_test, std::size_t n_test_full, std::size_t size,
                 std::size_t bands, std::size_t ratio) {
    data::DatasetSpec spec;
    spec.seed = seed;
    spec.n_train = n_train;
    spec.n_val = n_val;
    spec.n_test = n_test;
    spec.n_test_full = n_test_full;
    spec.height = size;
    spec.width = size;
    spec.bands = bands;
    spec.ratio = ratio;
    if (size % ratio != 0)
        throw ConfigError("--size must be divisible by --ratio");
    data::DatasetManifest m = data::build_dataset(out, spec);
    std::size_t total = 0;
    for (const auto& s : m.splits) total += s.ids.size();
    std::printf("wrote %zu samples to %s\n", total, out.c_str());
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir, bool resume) {
    config::RunConfig cfg =
        config_path.empty() ? config::RunConfig{} : config::load_run_config(config_path);
    data::DatasetManifest manifest = data::load_manifest(data_dir);
    if (cfg.model.bands != manifest.bands)
        throw ConfigError("config bands=" + std::to_string(cfg.model.bands) +
                          " but dataset has " + std::to_string(manifest.bands));
    auto items = load_split_items(data_dir, manifest, "train");

    model::LFormerModel<float> m;
    train::AdamState<float> state;
    std::int64_t start_step = 0;
    if (resume) {
        io::Checkpoint ck = io::load_checkpoint(checkpoint_dir_from(out_dir));
        m = std::move(ck.model);
        state = std::move(ck.adam);
        start_step = ck.step;
        std::printf("resuming from step %lld\n", static_cast<long long>(start_step));
    } else {
        m = model::build<float>(cfg.model);
    }

    train::TrainResult res =
        train::run_training(m, items, cfg.train_options(), out_dir, state, start_step);
    std::printf("trained %lld steps: train loss %.6f -> %.6f\n",
                static_cast<long long>(cfg.steps), res.initial_loss, res.final_loss);
    return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data_dir, const std::string& split,
             const std::string& mode, const std::string& out_csv, std::size_t q_window) {
    data::DatasetManifest manifest = data::load_manifest(data_dir);
    const data::SplitInfo& info = manifest.at(split);
    const bool reduced = mode == "reduced";
    if (!reduced && mode != "full") throw ConfigError("--mode must be reduced or full");
    if (reduced && !info.has_gt)
        throw ConfigError("reduced-resolution evaluation needs a split with ground truth");
    if (!reduced && info.has_gt)
        throw ConfigError("full-resolution evaluation runs on a GT-less split only");

    const bool identity = ckpt == "none";
    model::LFormerModel<float> m;
    if (!identity) {
        m = io::load_checkpoint(checkpoint_dir_from(ckpt)).model;
        if (m.config.bands != manifest.bands)
            throw DataError("checkpoint bands do not match the dataset");
    }

    metrics::MetricReport report;
    for (const auto& id : info.ids) {
        data::Sample s = data::load_sample(data_dir, split, id, info.has_gt);
        Tensor<float> fused_f = identity ? s.ms_up : model::forward(m, s.ms_up, s.pan);
        Tensor<double> fused = fused_f.cast<double>();

        metrics::MetricRow row;
        row.id = id;
        if (reduced) {
            Tensor<double> gt = s.gt.cast<double>();
            row.sam = metrics::sam_degrees(fused, gt);
            row.ergas = metrics::ergas(fused, gt, static_cast<double>(manifest.ratio));
            row.q2n = metrics::q2n(fused, gt, q_window);
            row.psnr = metrics::psnr(fused, gt);
            row.ssim = metrics::ssim(fused, gt).item();
        } else {
            Tensor<double> ms = s.ms.cast<double>();
            Tensor<double> pan = s.pan.cast<double>();
            Tensor<double> pan_lo = data::degrade_ms(pan, manifest.ratio);
            row.d_lambda = metrics::d_lambda(fused, ms, q_window);
            row.d_s = metrics::d_s(fused, ms, pan, pan_lo, q_window);
            row.hqnr = metrics::hqnr(row.d_lambda, row.d_s);
        }
        report.rows.push_back(row);
    }
    report.write_csv(out_csv);
    const metrics::MetricRow mean = report.aggregate_mean();
    if (reduced)
        std::printf("%zu samples: SAM %.4f  ERGAS %.4f  Q2n %.4f  PSNR %.4f  SSIM %.4f\n",
                    report.rows.size(), mean.sam, mean.ergas, mean.q2n, mean.psnr, mean.ssim);
    else
        std::printf("%zu samples: D_lambda %.4f  D_s %.4f  HQNR %.4f\n", report.rows.size(),
                    mean.d_lambda, mean.d_s, mean.hqnr);
    return 0;
}

int cmd_bench(const std::string& config_path, const std::string& variants_csv, std::size_t size,
              const std::string& out_csv, int warm, int runs) {
    config::RunConfig cfg =
        config_path.empty() ? config::RunConfig{} : config::load_run_config(config_path);
    std::vector<model::Variant> variants;
    std::string token;
    std::istringstream is(variants_csv);
    while (std::getline(is, token, ',')) {
        if (!token.empty()) variants.push_back(model::variant_from_string(token));
    }
    if (variants.empty()) throw ConfigError("--variants lists no variant");

    auto rows = profiler::compare_variants(cfg.model, size, size, variants, warm, runs);
    const std::string csv = profiler::profile_csv(rows);
    std::ofstream f(out_csv, std::ios::trunc);
    if (!f) throw DataError("cannot open " + out_csv);
    f << csv;
    for (const auto& r : rows)
        std::printf("%-10s params %9zu  flops %12lld  map-apply %12lld  %s\n", r.variant.c_str(),
                    r.params, static_cast<long long>(r.flops),
                    static_cast<long long>(r.map_apply_flops),
                    r.time.runs ? (std::to_string(r.time.mean_ms) + " ms").c_str() : "");
    return 0;
}

int cmd_report(const std::string& ckpt, const std::string& data_dir, const std::string& split,
               const std::string& sample_id, const std::string& out_dir) {
    data::DatasetManifest manifest = data::load_manifest(data_dir);
    const data::SplitInfo& info = manifest.at(split);
    bool found = false;
    for (const auto& id : info.ids) found = found || id == sample_id;
    if (!found) throw DataError("no sample '" + sample_id + "' in split '" + split + "'");

    io::Checkpoint ck = io::load_checkpoint(checkpoint_dir_from(ckpt));
    data::Sample s = data::load_sample(data_dir, split, sample_id, info.has_gt);

    model::ForwardTrace<float> trace;
    Tensor<float> fused = model::forward(ck.model, s.ms_up, s.pan, &trace);

    fs::create_directories(out_dir);
    {
        std::ofstream f(fs::path(out_dir) / "attention_similarity.csv", std::ios::trunc);
        f << profiler::similarity_csv(profiler::similarity_matrix(trace));
    }

    const std::size_t h = s.ms_up.dim(0), w = s.ms_up.dim(1);
    for (std::size_t b = 0; b < trace.global_features.size(); ++b) {
        // channel-mean of the block's global features, min-max normalized
        const auto& tokens = trace.global_features[b];
        const std::size_t d = tokens.dim(1);
        std::vector<float> img(h * w, 0.0f);
        for (std::size_t p = 0; p < h * w; ++p) {
            float acc = 0;
            for (std::size_t cc = 0; cc < d; ++cc) acc += tokens.data()[p * d + cc];
            img[p] = acc / static_cast<float>(d);
        }
        char name[64];
        std::snprintf(name, sizeof(name), "feature_block_%zu.ppm", b + 1);
        data::write_ppm((fs::path(out_dir) / name).string(), Tensor<float>({h, w}, img), true);
    }

    if (info.has_gt) {
        const std::size_t c = s.gt.dim(2);
        std::vector<float> err(h * w, 0.0f);
        for (std::size_t p = 0; p < h * w; ++p) {
            float acc = 0;
            for (std::size_t cc = 0; cc < c; ++cc)
                acc += std::fabs(fused.data()[p * c + cc] - s.gt.data()[p * c + cc]);
            err[p] = acc / static_cast<float>(c);
        }
        data::write_ppm((fs::path(out_dir) / "error_map.ppm").string(), Tensor<float>({h, w}, err),
                        true);
    }

    // fused output as an 8-bit preview (first 3 bands, or grayscale)
    const std::size_t c = fused.dim(2);
    if (c >= 3) {
        std::vector<float> rgb(h * w * 3);
        for (std::size_t p = 0; p < h * w; ++p)
            for (std::size_t cc = 0; cc < 3; ++cc) rgb[p * 3 + cc] = fused.data()[p * c + cc];
        data::write_ppm((fs::path(out_dir) / "fused.ppm").string(), Tensor<float>({h, w, 3}, rgb));
    } else {
        std::vector<float> gray(h * w);
        for (std::size_t p = 0; p < h * w; ++p) gray[p] = fused.data()[p * c];
        data::write_ppm((fs::path(out_dir) / "fused.ppm").string(), Tensor<float>({h, w}, gray));
    }
    std::printf("report written to %s\n", out_dir.c_str());
    return 0;
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"linearly-evolved attention pan-sharpening toolkit"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    std::string gen_out;
    std::uint64_t gen_seed = 0;
    std::size_t gen_train = 16, gen_val = 4, gen_test = 4, gen_test_full = 0;
    std::size_t gen_size = 64, gen_bands = 4, gen_ratio = 4;
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--seed", gen_seed, "generation seed");
    gen->add_option("--train", gen_train, "training samples");
    gen->add_option("--val", gen_val, "validation samples");
    gen->add_option("--test", gen_test, "reduced-resolution test samples");
    gen->add_option("--test-full", gen_test_full, "GT-less full-resolution test samples");
    gen->add_option("--size", gen_size, "sample height/width");
    gen->add_option("--bands", gen_bands, "multispectral bands");
    gen->add_option("--ratio", gen_ratio, "PAN/MS resolution ratio");

    // train
    auto* tr = app.add_subcommand("train", "train a model");
    std::string tr_config, tr_data, tr_out;
    bool tr_resume = false;
    tr->add_option("--config", tr_config, "key=value run configuration");
    tr->add_option("--data", tr_data, "dataset directory")->required();
    tr->add_option("--out", tr_out, "output directory")->required();
    tr->add_flag("--resume", tr_resume, "continue from the latest checkpoint in --out");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint (or the bicubic baseline)");
    std::string ev_ckpt = "none", ev_data, ev_split = "test", ev_mode = "reduced", ev_out;
    std::size_t ev_window = 32;
    ev->add_option("--ckpt", ev_ckpt, "checkpoint directory, or 'none' for the bicubic baseline");
    ev->add_option("--data", ev_data, "dataset directory")->required();
    ev->add_option("--split", ev_split, "dataset split");
    ev->add_option("--mode", ev_mode, "reduced|full");
    ev->add_option("--out", ev_out, "metric report CSV")->required();
    ev->add_option("--q-window", ev_window, "Q-index window size");

    // bench
    auto* be = app.add_subcommand("bench", "profile parameters, FLOPs and runtime per variant");
    std::string be_config, be_variants = "evolved,recompute,shared", be_out;
    std::size_t be_size = 64;
    int be_warm = 1, be_runs = 5;
    be->add_option("--config", be_config, "key=value run configuration");
    be->add_option("--variants", be_variants, "comma-separated variant list");
    be->add_option("--size", be_size, "input height/width");
    be->add_option("--out", be_out, "profile CSV")->required();
    be->add_option("--warm", be_warm, "warmup runs");
    be->add_option("--runs", be_runs, "timed runs (0 disables timing)");

    // report
    auto* re = app.add_subcommand("report", "attention/feature visualisation for one sample");
    std::string re_ckpt, re_data, re_split = "test", re_sample, re_out;
    re->add_option("--trace-from", re_ckpt, "checkpoint directory")->required();
    re->add_option("--data", re_data, "dataset directory")->required();
    re->add_option("--split", re_split, "dataset split");
    re->add_option("--sample", re_sample, "sample id")->required();
    re->add_option("--out", re_out, "output directory")->required();

    try {
        app.parse(argc, argv);
        if (gen->parsed())
            return cmd_gen_data(gen_out, gen_seed, gen_train, gen_val, gen_test, gen_test_full,
                                gen_size, gen_bands, gen_ratio);
        if (tr->parsed()) return cmd_train(tr_config, tr_data, tr_out, tr_resume);
        if (ev->parsed()) return cmd_eval(ev_ckpt, ev_data, ev_split, ev_mode, ev_out, ev_window);
        if (be->parsed()) return cmd_bench(be_config, be_variants, be_size, be_out, be_warm, be_runs);
        if (re->parsed()) return cmd_report(re_ckpt, re_data, re_split, re_sample, re_out);
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // --help exits cleanly
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const DimensionError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace lformer::cli
