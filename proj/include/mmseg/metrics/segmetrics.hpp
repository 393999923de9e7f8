#pragma once

#include <string>
#include <vector>

#include "mmseg/core/tensor.hpp"
#include "mmseg/data/sample.hpp"

namespace mmseg {

// Nested evaluation regions. wt = {1,2,3}, tc = {2,3}, ec = {3}.
struct RegionMasks {
    int d = 0, h = 0, w = 0;
    std::vector<std::uint8_t> wt, tc, ec;
};

RegionMasks derive_regions(const LabelVolume& labels);

// 2|A∩B| / (|A|+|B|); both-empty convention -> 1.0.
double dice_score(const std::vector<std::uint8_t>& pred,
                  const std::vector<std::uint8_t>& gt);

// 1 - mean over foreground classes of soft dice, smoothing eps = 1e-5.
// probs is (4, D, H, W); if g_probs is non-null the gradient is accumulated.
double soft_dice_loss(const Tensor& probs, const LabelVolume& gt,
                      Tensor* g_probs = nullptr);

// Mean per-voxel cross-entropy -ln p[true class], eps-clamped.
double cross_entropy_loss(const Tensor& probs, const LabelVolume& gt,
                          Tensor* g_probs = nullptr);

// Default segmentation loss: soft dice + cross-entropy, with gradient taken
// directly on the logits.
double segmentation_loss(const Tensor& logits, const LabelVolume& gt,
                         Tensor* g_logits = nullptr);

// Hard per-voxel class decisions from probabilities.
LabelVolume argmax_labels(const Tensor& probs);

// -------- report arithmetic (0-100 dice scale) --------

struct DiceEntry {
    std::string method;
    ModalityMask mask;
    std::string anchor;
    double wt = 0, tc = 0, ec = 0;  // each in [0,100]
};

struct DiceRow {
    std::string method;
    ModalityMask mask;
    std::string anchor;
    double wt = 0, tc = 0, ec = 0, avg = 0;
    double improvement = 0;
    bool has_improvement = false;
};

struct DiceReport {
    std::vector<DiceRow> rows;
    std::string to_csv() const;  // header: method,mask,anchor,wt,tc,ec,avg,imp
};

// Half-up rounding to two decimals, matching report display.
double round2(double v);

DiceReport aggregate_report(const std::vector<DiceEntry>& entries);

double improvement(double avg_new, double avg_baseline);
double average_improvement(const std::vector<double>& deltas);

}  // namespace mmseg
