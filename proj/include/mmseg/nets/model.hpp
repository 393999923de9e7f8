#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mmseg/align/anchor_spec.hpp"
#include "mmseg/data/sample.hpp"
#include "mmseg/nets/layers.hpp"

namespace mmseg {

// Per-modality feature tensor in the shared latent space. `values` is the
// mean-head output; (mean_map, logvar_map) are populated when the
// standard-normal anchor needs them.
struct LatentFeatures {
    Tensor values;  // (C, D', H', W')
    int modality = 0;
    bool has_stats = false;
    Tensor mean_map, logvar_map;
};

struct EncoderConfig {
    int base_channels = 8;
    int max_channels = 32;
    int latent_channels = 8;
    int downsample_factor = 4;  // power of two

    int stage_count() const;
    void validate() const;
};

// Small conv encoder: stem k3 conv, log2(downsample) stride-2 stages, then
// 1x1 mean and log-variance heads. The mean map is the downstream latent.
struct Encoder {
    EncoderConfig cfg;
    Conv3d stem;
    std::vector<Conv3d> down;
    Conv3d mean_head, logvar_head;

    Encoder() = default;
    explicit Encoder(const EncoderConfig& config);
    void init_params(Rng& rng);
    void zero_grad();

    struct Acts {
        Tensor input;  // (1,D,H,W)
        Tensor stem_pre, stem_act;
        std::vector<Tensor> down_pre, down_act;
    };

    // volume is (D,H,W); spatial dims must be divisible by downsample_factor.
    LatentFeatures forward(const Tensor& volume, int modality, bool with_stats,
                           Acts* acts = nullptr) const;
    // Accumulates parameter gradients; g_logvar may be null.
    void backward(const Acts& acts, const Tensor& g_values, const Tensor* g_logvar);
};

// Decoder from latent shape back to per-voxel class logits (4 classes).
struct Predictor {
    int in_channels = 0, base_channels = 0, classes = 4;
    Conv3d in_conv;
    std::vector<Conv3d> up_convs;
    Conv3d out_conv;

    Predictor() = default;
    Predictor(int in_channels_, int base_channels_, int upsample_stages, int classes_ = 4);
    void init_params(Rng& rng);
    void zero_grad();

    struct Acts {
        Tensor latent;
        Tensor in_pre, in_act;
        std::vector<Tensor> up_in, up_pre, up_act;  // up_in = post-upsample input
    };

    Tensor forward(const Tensor& latent, Acts* acts = nullptr) const;  // logits
    Tensor backward(const Acts& acts, const Tensor& g_logits);         // returns g_latent
};

// Per-voxel softmax over the channel axis.
Tensor softmax_channels(const Tensor& logits);
// Chain rule through softmax: given dL/dprobs, return dL/dlogits.
Tensor softmax_backward(const Tensor& probs, const Tensor& g_probs);

enum class FusionMode { mean = 0, concat = 1 };

struct ModelConfig {
    int modality_count = 4;
    EncoderConfig encoder;
    int predictor_base_channels = 8;
    AnchorSpec anchor;
    FusionMode fusion = FusionMode::mean;

    int predictor_in_channels() const {
        return fusion == FusionMode::concat
                   ? modality_count * encoder.latent_channels
                   : encoder.latent_channels;
    }
    void validate() const;
};

// One encoder per modality plus a shared predictor. Used for both teachers
// (all modalities) and students (only masked modalities exercised).
struct SegModel {
    ModelConfig cfg;
    std::vector<Encoder> encoders;
    Predictor predictor;
    Tensor theta, gtheta;  // adaptive anchor parameters, length J
    std::uint64_t init_seed = 0;
    std::uint64_t step_count = 0;

    static SegModel create(const ModelConfig& config, std::uint64_t seed);

    LatentFeatures encode(const Tensor& volume, int modality,
                          Encoder::Acts* acts = nullptr) const;
    Tensor predict_logits(const Tensor& latent, Predictor::Acts* acts = nullptr) const;
    // probabilities over 4 classes, (4, D, H, W)
    Tensor predict_segmentation(const Tensor& latent) const;

    // Combines per-modality latents into the predictor input. Mean over
    // present modalities by default; concat zero-fills absent slots.
    Tensor fuse_latents(const std::vector<LatentFeatures>& latents,
                        const ModalityMask& mask) const;
    // Fusion input for a single-modality pass during training.
    Tensor training_fusion(const LatentFeatures& latent) const;

    void zero_grad();
    using ParamVisitor = std::function<void(const std::string&, Tensor&, Tensor&)>;
    void visit_params(const ParamVisitor& fn);
    std::size_t param_count();

    bool needs_stats() const { return cfg.anchor.kind == AnchorKind::standard_normal; }
};

}  // namespace mmseg
