#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmseg/data/phantom.hpp"
#include "mmseg/data/volume_io.hpp"
#include "mmseg/nets/checkpoint.hpp"
#include "mmseg/runner/trainer.hpp"
#include "mmseg/theory/theory.hpp"

namespace {

using namespace mmseg;

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << text;
}

ModalityMask parse_mask(const std::string& s) {
    ModalityMask mask{0, static_cast<int>(s.size())};
    for (std::size_t j = 0; j < s.size(); ++j) {
        if (s[j] == 'o') {
            mask.bits |= 1u << j;
        } else if (s[j] != 'x') {
            throw std::runtime_error("mask must use 'o' (present) and 'x' (missing): " + s);
        }
    }
    if (mask.empty()) throw std::runtime_error("mask must keep at least one modality");
    return mask;
}

TrainConfig resolve_config(const std::string& path, std::uint64_t seed, bool seed_set) {
    TrainConfig config = path.empty() ? TrainConfig{} : load_config(path);
    if (seed_set) config.seed = seed;
    config.model.modality_count = config.modality_count();
    config.validate();
    return config;
}

std::vector<MultiModalSample> eval_split_of(const TrainConfig& config) {
    const auto all = build_dataset(config);
    std::vector<MultiModalSample> train_set, eval_set;
    split_dataset(all, config.holdout, train_set, eval_set);
    return eval_set;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"missing-modality segmentation toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_path, teacher_path, checkpoint_path, mask_str;
    std::uint64_t seed = 0;
    bool seed_set = false;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file");
        cmd->add_option("--seed", seed, "override every seed stream")
            ->each([&](const std::string&) { seed_set = true; });
    };

    auto* gen = app.add_subcommand("gen-data", "write synthetic subjects to a directory");
    add_common(gen);
    gen->add_option("--out", out_path, "output directory")->required();

    std::string weights_path = "weights.csv", log_path;
    auto* teach = app.add_subcommand("train-teacher", "train the all-modality teacher");
    add_common(teach);
    teach->add_option("--out", checkpoint_path, "checkpoint path")->required();
    teach->add_option("--weights-csv", weights_path, "adaptive weight log");
    teach->add_option("--log-csv", log_path, "training log");

    auto* stud = app.add_subcommand("train-student", "distill a masked-modality student");
    add_common(stud);
    stud->add_option("--teacher", teacher_path, "teacher checkpoint");
    stud->add_option("--mask", mask_str, "modality mask, e.g. oxox")->required();
    stud->add_option("--out", checkpoint_path, "checkpoint path")->required();
    stud->add_option("--log-csv", log_path, "training log");

    auto* ev = app.add_subcommand("eval", "dice report over every modality mask");
    add_common(ev);
    ev->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    ev->add_option("--out", out_path, "report CSV path")->required();

    auto* lat = app.add_subcommand("export-latents", "latent summaries + 2-D PCA");
    add_common(lat);
    lat->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    lat->add_option("--out", out_path, "CSV path")->required();

    int sample_index = 0, axis = 0, slice_index = 0;
    auto* slices = app.add_subcommand("export-slices", "PPM slice images");
    add_common(slices);
    slices->add_option("--checkpoint", checkpoint_path,
                       "optional checkpoint for predictions");
    slices->add_option("--sample", sample_index, "dataset sample index");
    slices->add_option("--axis", axis, "slice axis: 0=D 1=H 2=W");
    slices->add_option("--index", slice_index, "slice position");
    slices->add_option("--out", out_path, "output file prefix")->required();

    int trials_sl = 1000, trials_elbo = 200;
    auto* theory_cmd = app.add_subcommand("verify-theory", "information-theoretic checks");
    theory_cmd->add_option("--seed", seed, "trial seed")
        ->each([&](const std::string&) { seed_set = true; });
    theory_cmd->add_option("--trials-sl", trials_sl, "single-letterization trials");
    theory_cmd->add_option("--trials-elbo", trials_elbo, "bound-tightness trials");
    theory_cmd->add_option("--out", out_path, "per-trial CSV path");

    auto* sweep = app.add_subcommand("sweep-anchor",
                                     "single-modality teacher sweep for the base anchor");
    add_common(sweep);
    sweep->add_option("--out", out_path, "sweep CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const TrainConfig config = resolve_config(config_path, seed, seed_set);
            if (config.dataset.kind != DatasetSpec::Kind::synthetic)
                throw std::runtime_error("gen-data requires a synthetic dataset config");
            for (int i = 0; i < config.dataset.count; ++i) {
                PhantomConfig p = config.dataset.phantom;
                p.seed = mix_seed(config.seed, 0xda7a + static_cast<std::uint64_t>(i));
                MultiModalSample s = generate_phantom(p);
                s.sample_id = "synth" + std::to_string(i);
                write_subject_dir(out_path, s);
            }
            std::cout << "wrote " << config.dataset.count << " subjects to " << out_path
                      << "\n";
        } else if (teach->parsed()) {
            const TrainConfig config = resolve_config(config_path, seed, seed_set);
            TrainResult result = train_teacher(config);
            save_checkpoint(checkpoint_path, result.model);
            write_text(weights_path, result.weights_csv());
            if (!log_path.empty()) write_text(log_path, result.log_csv());
            std::cout << "teacher saved to " << checkpoint_path << "; final gap "
                      << result.log.back().gap << "\n";
        } else if (stud->parsed()) {
            const TrainConfig config = resolve_config(config_path, seed, seed_set);
            const ModalityMask mask = parse_mask(mask_str);
            SegModel teacher;
            SegModel* teacher_ptr = nullptr;
            if (!teacher_path.empty()) {
                teacher = load_checkpoint(teacher_path);
                teacher_ptr = &teacher;
            }
            TrainResult result = train_student(config, teacher_ptr, mask);
            save_checkpoint(checkpoint_path, result.model);
            if (!log_path.empty()) write_text(log_path, result.log_csv());
            std::cout << "student (" << mask.to_string() << ") saved to "
                      << checkpoint_path << "\n";
        } else if (ev->parsed()) {
            const TrainConfig config = resolve_config(config_path, seed, seed_set);
            SegModel model = load_checkpoint(checkpoint_path);
            const auto eval_set = eval_split_of(config);
            const auto masks = enumerate_modality_masks(model.cfg.modality_count);
            const DiceReport report = evaluate(model, eval_set, masks, config);
            write_text(out_path, report.to_csv());
            std::cout << "report (" << report.rows.size() << " rows) written to "
                      << out_path << "\n";
        } else if (lat->parsed()) {
            const TrainConfig config = resolve_config(config_path, seed, seed_set);
            SegModel model = load_checkpoint(checkpoint_path);
            write_text(out_path, latents_csv(model, eval_split_of(config), config));
            std::cout << "latents written to " << out_path << "\n";
        } else if (slices->parsed()) {
            const TrainConfig config = resolve_config(config_path, seed, seed_set);
            const auto all = build_dataset(config);
            if (sample_index < 0 || sample_index >= static_cast<int>(all.size()))
                throw std::runtime_error("sample index out of range");
            if (checkpoint_path.empty()) {
                export_slices(all[sample_index], nullptr, axis, slice_index, out_path);
            } else {
                SegModel model = load_checkpoint(checkpoint_path);
                const MultiModalSample crop = center_crop(
                    all[sample_index], config.crop_d, config.crop_h, config.crop_w);
                std::vector<LatentFeatures> lats;
                for (int j = 0; j < model.cfg.modality_count; ++j) {
                    lats.push_back(model.encode(crop.volumes[j], j));
                }
                const ModalityMask full = ModalityMask::full(model.cfg.modality_count);
                const LabelVolume pred = argmax_labels(
                    model.predict_segmentation(model.fuse_latents(lats, full)));
                export_slices(crop, &pred, axis, slice_index, out_path);
            }
            std::cout << "slices written with prefix " << out_path << "\n";
        } else if (theory_cmd->parsed()) {
            const std::uint64_t s = seed_set ? seed : 1;
            std::ostringstream csv;
            csv << "check,trial,lhs,rhs,gap,se\n";
            int total_violations = 0;
            for (int j = 2; j <= 4; ++j) {
                const auto rec = theory::check_single_letterization(trials_sl / 3, j, 4, s);
                total_violations += rec.violations;
                for (std::size_t t = 0; t < rec.rows.size(); ++t) {
                    const auto& r = rec.rows[t];
                    csv << "single-letterization-J" << j << "," << t << "," << r.lhs
                        << "," << r.rhs << "," << r.gap << "," << r.se << "\n";
                }
                std::cout << "single-letterization J=" << j << ": " << rec.trials
                          << " trials, " << rec.violations << " violations, max slack "
                          << rec.max_slack << "\n";
            }
            const auto elbo = theory::check_elbo_tightness(trials_elbo, 4, s);
            total_violations += elbo.violations;
            for (std::size_t t = 0; t < elbo.rows.size(); ++t) {
                const auto& r = elbo.rows[t];
                csv << "bound-tightness," << t << "," << r.lhs << "," << r.rhs << ","
                    << r.gap << "," << r.se << "\n";
            }
            std::cout << "bound tightness: " << elbo.trials << " trials, "
                      << elbo.violations << " violations, max slack " << elbo.max_slack
                      << "\n";
            if (!out_path.empty()) write_text(out_path, csv.str());
            if (total_violations > 0) {
                std::cout << "FAIL: " << total_violations << " violations\n";
                return 1;
            }
            std::cout << "all checks passed\n";
        } else if (sweep->parsed()) {
            const TrainConfig config = resolve_config(config_path, seed, seed_set);
            const SweepResult result = sweep_anchor(config);
            if (!out_path.empty()) write_text(out_path, result.to_csv());
            std::cout << result.to_csv();
            std::cout << "best base modality k = " << result.best_k << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
