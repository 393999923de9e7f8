#include "mmseg/nets/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mmseg {

int EncoderConfig::stage_count() const {
    int f = downsample_factor, n = 0;
    while (f > 1) {
        f /= 2;
        ++n;
    }
    return n;
}

void EncoderConfig::validate() const {
    if (base_channels < 1 || latent_channels < 1 || max_channels < base_channels)
        throw std::invalid_argument("EncoderConfig: bad channel counts");
    int f = downsample_factor;
    if (f < 1 || (f & (f - 1)) != 0)
        throw std::invalid_argument("EncoderConfig: downsample_factor must be a power of two");
}

Encoder::Encoder(const EncoderConfig& config) : cfg(config) {
    cfg.validate();
    int c = cfg.base_channels;
    stem = Conv3d(1, c, 3, 1, 1);
    for (int i = 0; i < cfg.stage_count(); ++i) {
        const int next = std::min(2 * c, cfg.max_channels);
        down.emplace_back(c, next, 2, 2, 0);
        c = next;
    }
    mean_head = Conv3d(c, cfg.latent_channels, 1, 1, 0);
    logvar_head = Conv3d(c, cfg.latent_channels, 1, 1, 0);
}

void Encoder::init_params(Rng& rng) {
    stem.init_params(rng);
    for (auto& conv : down) conv.init_params(rng);
    mean_head.init_params(rng);
    logvar_head.init_params(rng);
}

void Encoder::zero_grad() {
    stem.zero_grad();
    for (auto& conv : down) conv.zero_grad();
    mean_head.zero_grad();
    logvar_head.zero_grad();
}

LatentFeatures Encoder::forward(const Tensor& volume, int modality, bool with_stats,
                                Acts* acts) const {
    const auto& s = volume.shape();
    if (s.size() != 3) throw std::invalid_argument("encode: volume must be 3D");
    for (int axis = 0; axis < 3; ++axis) {
        if (s[axis] % cfg.downsample_factor != 0)
            throw std::invalid_argument("encode: shape not divisible by downsample factor");
    }
    Tensor x({1, s[0], s[1], s[2]}, volume.vec());

    Tensor stem_pre = stem.forward(x);
    Tensor cur = relu(stem_pre);
    if (acts) {
        acts->input = x;
        acts->stem_pre = stem_pre;
        acts->stem_act = cur;
        acts->down_pre.clear();
        acts->down_act.clear();
    }
    for (const auto& conv : down) {
        Tensor pre = conv.forward(cur);
        Tensor act = relu(pre);
        if (acts) {
            acts->down_pre.push_back(pre);
            acts->down_act.push_back(act);
        }
        cur = std::move(act);
    }

    LatentFeatures latent;
    latent.modality = modality;
    latent.values = mean_head.forward(cur);
    if (with_stats) {
        latent.has_stats = true;
        latent.mean_map = latent.values;
        latent.logvar_map = logvar_head.forward(cur);
    }
    return latent;
}

void Encoder::backward(const Acts& acts, const Tensor& g_values, const Tensor* g_logvar) {
    const Tensor& last = acts.down_act.empty() ? acts.stem_act : acts.down_act.back();
    Tensor g = mean_head.backward(last, g_values);
    if (g_logvar) {
        g.axpy(1.0, logvar_head.backward(last, *g_logvar));
    }
    for (int i = static_cast<int>(down.size()) - 1; i >= 0; --i) {
        const Tensor& in = i == 0 ? acts.stem_act : acts.down_act[i - 1];
        Tensor g_pre = relu_grad(acts.down_pre[i], g);
        g = down[i].backward(in, g_pre);
    }
    Tensor g_stem_pre = relu_grad(acts.stem_pre, g);
    stem.backward(acts.input, g_stem_pre);
}

Predictor::Predictor(int in_channels_, int base_channels_, int upsample_stages,
                     int classes_)
    : in_channels(in_channels_), base_channels(base_channels_), classes(classes_) {
    in_conv = Conv3d(in_channels, base_channels, 3, 1, 1);
    for (int i = 0; i < upsample_stages; ++i) {
        up_convs.emplace_back(base_channels, base_channels, 3, 1, 1);
    }
    out_conv = Conv3d(base_channels, classes, 1, 1, 0);
}

void Predictor::init_params(Rng& rng) {
    in_conv.init_params(rng);
    for (auto& conv : up_convs) conv.init_params(rng);
    out_conv.init_params(rng);
}

void Predictor::zero_grad() {
    in_conv.zero_grad();
    for (auto& conv : up_convs) conv.zero_grad();
    out_conv.zero_grad();
}

Tensor Predictor::forward(const Tensor& latent, Acts* acts) const {
    Tensor pre = in_conv.forward(latent);
    Tensor cur = relu(pre);
    if (acts) {
        acts->latent = latent;
        acts->in_pre = pre;
        acts->in_act = cur;
        acts->up_in.clear();
        acts->up_pre.clear();
        acts->up_act.clear();
    }
    for (const auto& conv : up_convs) {
        Tensor up = upsample2(cur);
        Tensor p = conv.forward(up);
        Tensor a = relu(p);
        if (acts) {
            acts->up_in.push_back(up);
            acts->up_pre.push_back(p);
            acts->up_act.push_back(a);
        }
        cur = std::move(a);
    }
    return out_conv.forward(cur);
}

Tensor Predictor::backward(const Acts& acts, const Tensor& g_logits) {
    const Tensor& last = acts.up_act.empty() ? acts.in_act : acts.up_act.back();
    Tensor g = out_conv.backward(last, g_logits);
    for (int i = static_cast<int>(up_convs.size()) - 1; i >= 0; --i) {
        Tensor g_pre = relu_grad(acts.up_pre[i], g);
        Tensor g_up = up_convs[i].backward(acts.up_in[i], g_pre);
        const Tensor& below = i == 0 ? acts.in_act : acts.up_act[i - 1];
        g = upsample2_grad(below.shape(), g_up);
    }
    Tensor g_pre = relu_grad(acts.in_pre, g);
    return in_conv.backward(acts.latent, g_pre);
}

Tensor softmax_channels(const Tensor& logits) {
    const auto& s = logits.shape();
    if (s.size() != 4) throw std::invalid_argument("softmax_channels: input must be 4D");
    const int C = s[0];
    const std::size_t voxels = logits.numel() / C;
    Tensor probs(s);
    for (std::size_t v = 0; v < voxels; ++v) {
        double mx = logits[v];
        for (int c = 1; c < C; ++c) mx = std::max(mx, logits[c * voxels + v]);
        double denom = 0.0;
        for (int c = 0; c < C; ++c) {
            const double e = std::exp(logits[c * voxels + v] - mx);
            probs[c * voxels + v] = e;
            denom += e;
        }
        for (int c = 0; c < C; ++c) probs[c * voxels + v] /= denom;
    }
    return probs;
}

Tensor softmax_backward(const Tensor& probs, const Tensor& g_probs) {
    probs.require_same_shape(g_probs, "softmax_backward");
    const int C = probs.shape()[0];
    const std::size_t voxels = probs.numel() / C;
    Tensor g_logits(probs.shape());
    for (std::size_t v = 0; v < voxels; ++v) {
        double inner = 0.0;
        for (int c = 0; c < C; ++c) inner += probs[c * voxels + v] * g_probs[c * voxels + v];
        for (int c = 0; c < C; ++c) {
            g_logits[c * voxels + v] =
                probs[c * voxels + v] * (g_probs[c * voxels + v] - inner);
        }
    }
    return g_logits;
}

void ModelConfig::validate() const {
    if (modality_count < 1) throw std::invalid_argument("ModelConfig: J must be >= 1");
    encoder.validate();
    if (predictor_base_channels < 1)
        throw std::invalid_argument("ModelConfig: bad predictor channels");
    if (anchor.kind == AnchorKind::fixed_modality || anchor.kind == AnchorKind::adaptive) {
        if (anchor.base_k < 0 || anchor.base_k >= modality_count)
            throw std::invalid_argument("ModelConfig: anchor base_k out of range");
    }
}

SegModel SegModel::create(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    SegModel model;
    model.cfg = config;
    model.init_seed = seed;
    for (int j = 0; j < config.modality_count; ++j) {
        Rng rng(mix_seed(seed, 0xe0c0 + static_cast<std::uint64_t>(j)));
        model.encoders.emplace_back(config.encoder);
        model.encoders.back().init_params(rng);
    }
    Rng rng(mix_seed(seed, 0xbead));
    model.predictor = Predictor(config.predictor_in_channels(),
                                config.predictor_base_channels,
                                config.encoder.stage_count());
    model.predictor.init_params(rng);
    model.theta = Tensor({config.modality_count});
    model.gtheta = Tensor({config.modality_count});
    return model;
}

LatentFeatures SegModel::encode(const Tensor& volume, int modality,
                                Encoder::Acts* acts) const {
    if (modality < 0 || modality >= cfg.modality_count)
        throw std::invalid_argument("encode: modality out of range");
    return encoders[modality].forward(volume, modality, needs_stats(), acts);
}

Tensor SegModel::predict_logits(const Tensor& latent, Predictor::Acts* acts) const {
    return predictor.forward(latent, acts);
}

Tensor SegModel::predict_segmentation(const Tensor& latent) const {
    return softmax_channels(predict_logits(latent));
}

Tensor SegModel::fuse_latents(const std::vector<LatentFeatures>& latents,
                              const ModalityMask& mask) const {
    if (mask.empty()) throw std::invalid_argument("fuse_latents: empty mask");
    const LatentFeatures* first = nullptr;
    for (const auto& lat : latents) {
        if (!mask.present(lat.modality)) continue;
        if (!first) {
            first = &lat;
        } else if (!lat.values.same_shape(first->values)) {
            throw std::invalid_argument("fuse_latents: latent shape mismatch");
        }
    }
    if (!first) throw std::invalid_argument("fuse_latents: no latent matches mask");

    if (cfg.fusion == FusionMode::mean) {
        Tensor fused(first->values.shape());
        int count = 0;
        for (const auto& lat : latents) {
            if (!mask.present(lat.modality)) continue;
            fused.axpy(1.0, lat.values);
            ++count;
        }
        fused.scale(1.0 / count);
        return fused;
    }

    // concat with zero-fill for absent modalities
    const auto& ls = first->values.shape();
    Tensor fused({cfg.modality_count * ls[0], ls[1], ls[2], ls[3]});
    const std::size_t block = first->values.numel();
    for (const auto& lat : latents) {
        if (!mask.present(lat.modality)) continue;
        std::copy_n(lat.values.data(), block,
                    fused.data() + static_cast<std::size_t>(lat.modality) * block);
    }
    return fused;
}

Tensor SegModel::training_fusion(const LatentFeatures& latent) const {
    if (cfg.fusion == FusionMode::mean) return latent.values;
    return fuse_latents({latent}, ModalityMask::single(latent.modality, cfg.modality_count));
}

void SegModel::zero_grad() {
    for (auto& enc : encoders) enc.zero_grad();
    predictor.zero_grad();
    gtheta.zero();
}

void SegModel::visit_params(const ParamVisitor& fn) {
    auto visit_conv = [&](const std::string& prefix, Conv3d& conv) {
        fn(prefix + ".w", conv.w, conv.gw);
        fn(prefix + ".b", conv.b, conv.gb);
    };
    for (int j = 0; j < cfg.modality_count; ++j) {
        const std::string p = "enc" + std::to_string(j);
        auto& enc = encoders[j];
        visit_conv(p + ".stem", enc.stem);
        for (std::size_t i = 0; i < enc.down.size(); ++i) {
            visit_conv(p + ".down" + std::to_string(i), enc.down[i]);
        }
        visit_conv(p + ".mean", enc.mean_head);
        visit_conv(p + ".logvar", enc.logvar_head);
    }
    visit_conv("pred.in", predictor.in_conv);
    for (std::size_t i = 0; i < predictor.up_convs.size(); ++i) {
        visit_conv("pred.up" + std::to_string(i), predictor.up_convs[i]);
    }
    visit_conv("pred.out", predictor.out_conv);
    fn("theta", theta, gtheta);
}

std::size_t SegModel::param_count() {
    std::size_t n = 0;
    visit_params([&](const std::string&, Tensor& p, Tensor&) { n += p.numel(); });
    return n;
}

}  // namespace mmseg
