#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mmseg/metrics/segmetrics.hpp"
#include "mmseg/runner/config.hpp"

namespace mmseg {

// Adaptive-moment optimizer over the model's named parameters.
class Adam {
public:
    explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(SegModel& model, double lr);

private:
    double beta1_, beta2_, eps_;
    std::uint64_t t_ = 0;
    std::vector<Tensor> m_, v_;  // aligned with visit order
};

struct EpochLog {
    int epoch = 0;
    double lr = 0.0;
    std::vector<double> seg_loss;  // per modality (teacher) or single (student)
    double align_loss = 0.0;
    double distill_loss = 0.0;
    double gap = 0.0;
    std::vector<double> weights;  // adaptive anchor weights, when applicable
};

struct TrainResult {
    SegModel model;
    std::vector<EpochLog> log;

    std::string weights_csv() const;  // epoch,w_1..w_J
    std::string log_csv() const;
};

// Synthetic or directory-ingested dataset; intensities normalized to [-1,1].
std::vector<MultiModalSample> build_dataset(const TrainConfig& config);

// Last `holdout` samples are reserved for evaluation.
void split_dataset(const std::vector<MultiModalSample>& all, int holdout,
                   std::vector<MultiModalSample>& train_set,
                   std::vector<MultiModalSample>& eval_set);

// Deterministic center crop used for evaluation passes.
MultiModalSample center_crop(const MultiModalSample& sample, int cd, int ch, int cw);

TrainResult train_teacher(const TrainConfig& config);

// teacher == nullptr trains the plain supervised (unimodal) baseline.
TrainResult train_student(const TrainConfig& config, SegModel* teacher,
                          const ModalityMask& mask);

// Per-case dice per region, averaged over cases, on the 0-100 scale; one row
// per mask in canonical order.
DiceReport evaluate(SegModel& model, const std::vector<MultiModalSample>& samples,
                    const std::vector<ModalityMask>& masks, const TrainConfig& config);

// Mean pairwise centroid distance of per-modality latent summaries.
double compute_modality_gap(SegModel& model, const std::vector<MultiModalSample>& samples,
                            const TrainConfig& config);

// One row per (sample, modality): channel-mean summary plus 2-D PCA
// projection over all rows.
std::string latents_csv(SegModel& model, const std::vector<MultiModalSample>& samples,
                        const TrainConfig& config);

// Binary PPM (P6) slices: one grayscale image per modality plus color-coded
// prediction/ground-truth label slices. axis: 0=D, 1=H, 2=W.
void export_slices(const MultiModalSample& sample, const LabelVolume* predicted,
                   int axis, int index, const std::string& out_prefix);

struct SweepResult {
    std::vector<std::vector<double>> dice;  // [teacher modality][target modality]
    std::vector<double> row_avg;
    int best_k = 0;

    std::string to_csv() const;
};

// Trains one single-modality teacher per modality and scores each against all
// single-modality targets; best row average selects the fixed-anchor base k.
SweepResult sweep_anchor(const TrainConfig& config);

}  // namespace mmseg
