#include "mmseg/runner/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mmseg {

using nlohmann::json;

void TrainConfig::validate() const {
    if (optim.learning_rate <= 0.0) throw std::invalid_argument("config: learning_rate <= 0");
    if (optim.batch_size < 1) throw std::invalid_argument("config: batch_size < 1");
    if (epochs < 1) throw std::invalid_argument("config: epochs < 1");
    if (crop_d < 1 || crop_h < 1 || crop_w < 1)
        throw std::invalid_argument("config: bad crop");
    if (dataset.kind == DatasetSpec::Kind::synthetic) {
        dataset.phantom.validate();
        if (dataset.count < 1) throw std::invalid_argument("config: dataset count < 1");
        if (holdout < 0 || holdout >= dataset.count)
            throw std::invalid_argument("config: holdout must be < dataset count");
    }
    model.validate();
    distill.validate();
}

TrainConfig parse_config(const std::string& json_text) {
    const json j = json::parse(json_text);
    TrainConfig c;

    if (j.contains("dataset")) {
        const auto& d = j["dataset"];
        const std::string kind = d.value("kind", "synthetic");
        if (kind == "synthetic") {
            c.dataset.kind = DatasetSpec::Kind::synthetic;
            c.dataset.count = d.value("count", c.dataset.count);
            auto& p = c.dataset.phantom;
            if (d.contains("shape")) {
                p.d = d["shape"][0];
                p.h = d["shape"][1];
                p.w = d["shape"][2];
            }
            p.modality_count = d.value("modalities", p.modality_count);
            p.informative_modality = d.value("informative_modality", p.informative_modality);
            p.noise_std = d.value("noise_std", p.noise_std);
            p.tumor_radius_min = d.value("radius_min", p.tumor_radius_min);
            p.tumor_radius_max = d.value("radius_max", p.tumor_radius_max);
        } else if (kind == "directory") {
            c.dataset.kind = DatasetSpec::Kind::directory;
            c.dataset.path = d.value("path", "");
            c.dataset.modality_count = d.value("modalities", 4);
        } else {
            throw std::invalid_argument("config: unknown dataset kind " + kind);
        }
    }

    if (j.contains("crop")) {
        c.crop_d = j["crop"][0];
        c.crop_h = j["crop"][1];
        c.crop_w = j["crop"][2];
    }

    if (j.contains("model")) {
        const auto& m = j["model"];
        c.model.encoder.base_channels = m.value("base_channels", c.model.encoder.base_channels);
        c.model.encoder.max_channels = m.value("max_channels", c.model.encoder.max_channels);
        c.model.encoder.latent_channels =
            m.value("latent_channels", c.model.encoder.latent_channels);
        c.model.encoder.downsample_factor =
            m.value("downsample", c.model.encoder.downsample_factor);
        c.model.predictor_base_channels =
            m.value("predictor_channels", c.model.predictor_base_channels);
        const std::string fusion = m.value("fusion", "mean");
        if (fusion == "mean") {
            c.model.fusion = FusionMode::mean;
        } else if (fusion == "concat") {
            c.model.fusion = FusionMode::concat;
        } else {
            throw std::invalid_argument("config: unknown fusion " + fusion);
        }
    }

    if (j.contains("anchor")) {
        const auto& a = j["anchor"];
        c.model.anchor.kind = anchor_kind_from_name(a.value("kind", "none"));
        c.model.anchor.base_k = a.value("base_k", 0);
        const std::string variant = a.value("variant", "closed-form");
        if (variant == "closed-form") {
            c.model.anchor.variant = NormalVariant::closed_form;
        } else if (variant == "paper-literal") {
            c.model.anchor.variant = NormalVariant::paper_literal;
        } else {
            throw std::invalid_argument("config: unknown normal variant " + variant);
        }
    }

    c.lambda_align = j.value("lambda_align", c.lambda_align);

    if (j.contains("optim")) {
        const auto& o = j["optim"];
        c.optim.learning_rate = o.value("learning_rate", c.optim.learning_rate);
        c.optim.decay = o.value("decay", c.optim.decay);
        c.optim.lr_floor = o.value("lr_floor", c.optim.lr_floor);
        c.optim.batch_size = o.value("batch_size", c.optim.batch_size);
    }

    c.epochs = j.value("epochs", c.epochs);
    c.student_epochs = j.value("student_epochs", c.student_epochs);

    if (j.contains("distill")) {
        const auto& d = j["distill"];
        c.distill.latent_weight = d.value("latent_weight", c.distill.latent_weight);
        c.distill.soft_label_weight =
            d.value("soft_label_weight", c.distill.soft_label_weight);
        c.distill.temperature = d.value("temperature", c.distill.temperature);
        const std::string mode = d.value("latent_mode", "mse");
        if (mode == "mse") {
            c.distill.latent_mode = LatentDistillMode::mse;
        } else if (mode == "gaussian-moment-kl") {
            c.distill.latent_mode = LatentDistillMode::gaussian_moment_kl;
        } else {
            throw std::invalid_argument("config: unknown latent_mode " + mode);
        }
        c.distill.fused_teacher_target =
            d.value("fused_teacher_target", c.distill.fused_teacher_target);
    }

    c.seed = j.value("seed", c.seed);
    c.holdout = j.value("holdout", c.holdout);
    c.model.modality_count = c.modality_count();
    c.validate();
    return c;
}

TrainConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string config_to_json(const TrainConfig& c) {
    json j;
    if (c.dataset.kind == DatasetSpec::Kind::synthetic) {
        j["dataset"] = {
            {"kind", "synthetic"},
            {"count", c.dataset.count},
            {"shape", {c.dataset.phantom.d, c.dataset.phantom.h, c.dataset.phantom.w}},
            {"modalities", c.dataset.phantom.modality_count},
            {"informative_modality", c.dataset.phantom.informative_modality},
            {"noise_std", c.dataset.phantom.noise_std},
            {"radius_min", c.dataset.phantom.tumor_radius_min},
            {"radius_max", c.dataset.phantom.tumor_radius_max},
        };
    } else {
        j["dataset"] = {{"kind", "directory"},
                        {"path", c.dataset.path},
                        {"modalities", c.dataset.modality_count}};
    }
    j["crop"] = {c.crop_d, c.crop_h, c.crop_w};
    j["model"] = {{"base_channels", c.model.encoder.base_channels},
                  {"max_channels", c.model.encoder.max_channels},
                  {"latent_channels", c.model.encoder.latent_channels},
                  {"downsample", c.model.encoder.downsample_factor},
                  {"predictor_channels", c.model.predictor_base_channels},
                  {"fusion", c.model.fusion == FusionMode::mean ? "mean" : "concat"}};
    j["anchor"] = {{"kind", anchor_kind_name(c.model.anchor.kind)},
                   {"base_k", c.model.anchor.base_k},
                   {"variant", c.model.anchor.variant == NormalVariant::closed_form
                                   ? "closed-form"
                                   : "paper-literal"}};
    j["lambda_align"] = c.lambda_align;
    j["optim"] = {{"learning_rate", c.optim.learning_rate},
                  {"decay", c.optim.decay},
                  {"lr_floor", c.optim.lr_floor},
                  {"batch_size", c.optim.batch_size}};
    j["epochs"] = c.epochs;
    j["student_epochs"] = c.student_epochs;
    j["distill"] = {
        {"latent_weight", c.distill.latent_weight},
        {"soft_label_weight", c.distill.soft_label_weight},
        {"temperature", c.distill.temperature},
        {"latent_mode",
         c.distill.latent_mode == LatentDistillMode::mse ? "mse" : "gaussian-moment-kl"},
        {"fused_teacher_target", c.distill.fused_teacher_target}};
    j["seed"] = c.seed;
    j["holdout"] = c.holdout;
    return j.dump(2);
}

}  // namespace mmseg
