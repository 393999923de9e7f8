#include "mmseg/metrics/segmetrics.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "mmseg/nets/model.hpp"

namespace mmseg {

namespace {
constexpr double kDiceSmooth = 1e-5;
constexpr double kProbEps = 1e-8;
constexpr int kClasses = 4;

void check_labels(const LabelVolume& labels) {
    for (std::uint8_t c : labels.v) {
        if (c > 3) throw std::invalid_argument("labels out of {0,1,2,3}");
    }
}

std::string format2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", round2(v));
    return buf;
}
}  // namespace

RegionMasks derive_regions(const LabelVolume& labels) {
    check_labels(labels);
    RegionMasks masks;
    masks.d = labels.d;
    masks.h = labels.h;
    masks.w = labels.w;
    masks.wt.resize(labels.size());
    masks.tc.resize(labels.size());
    masks.ec.resize(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const std::uint8_t c = labels.v[i];
        masks.wt[i] = c >= 1;
        masks.tc[i] = c >= 2;
        masks.ec[i] = c == 3;
    }
    return masks;
}

double dice_score(const std::vector<std::uint8_t>& pred,
                  const std::vector<std::uint8_t>& gt) {
    if (pred.size() != gt.size())
        throw std::invalid_argument("dice_score: shape mismatch");
    std::size_t inter = 0, p_count = 0, g_count = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] != 0, g = gt[i] != 0;
        inter += p && g;
        p_count += p;
        g_count += g;
    }
    if (p_count + g_count == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(p_count + g_count);
}

double soft_dice_loss(const Tensor& probs, const LabelVolume& gt, Tensor* g_probs) {
    check_labels(gt);
    const auto& s = probs.shape();
    if (s.size() != 4 || s[0] != kClasses || s[1] != gt.d || s[2] != gt.h || s[3] != gt.w)
        throw std::invalid_argument("soft_dice_loss: probs/labels shape mismatch");
    const std::size_t voxels = gt.size();

    double dice_sum = 0.0;
    for (int c = 1; c < kClasses; ++c) {
        const double* p = probs.data() + static_cast<std::size_t>(c) * voxels;
        double inter = 0.0, p_sum = 0.0;
        std::size_t g_sum = 0;
        for (std::size_t i = 0; i < voxels; ++i) {
            const bool g = gt.v[i] == c;
            inter += g ? p[i] : 0.0;
            p_sum += p[i];
            g_sum += g;
        }
        const double num = 2.0 * inter + kDiceSmooth;
        const double den = p_sum + static_cast<double>(g_sum) + kDiceSmooth;
        dice_sum += num / den;
        if (g_probs) {
            double* gp = g_probs->data() + static_cast<std::size_t>(c) * voxels;
            const double inv3 = 1.0 / (kClasses - 1);
            for (std::size_t i = 0; i < voxels; ++i) {
                const double g = gt.v[i] == c ? 1.0 : 0.0;
                gp[i] -= inv3 * (2.0 * g / den - num / (den * den));
            }
        }
    }
    return 1.0 - dice_sum / (kClasses - 1);
}

double cross_entropy_loss(const Tensor& probs, const LabelVolume& gt, Tensor* g_probs) {
    check_labels(gt);
    const auto& s = probs.shape();
    if (s.size() != 4 || s[0] != kClasses || s[1] != gt.d || s[2] != gt.h || s[3] != gt.w)
        throw std::invalid_argument("cross_entropy_loss: probs/labels shape mismatch");
    const std::size_t voxels = gt.size();
    double loss = 0.0;
    for (std::size_t i = 0; i < voxels; ++i) {
        const std::size_t idx = static_cast<std::size_t>(gt.v[i]) * voxels + i;
        const double p = std::max(probs[idx], kProbEps);
        loss -= std::log(p);
        if (g_probs) (*g_probs)[idx] -= 1.0 / (p * static_cast<double>(voxels));
    }
    return loss / static_cast<double>(voxels);
}

double segmentation_loss(const Tensor& logits, const LabelVolume& gt, Tensor* g_logits) {
    const Tensor probs = softmax_channels(logits);
    if (!g_logits) {
        return soft_dice_loss(probs, gt) + cross_entropy_loss(probs, gt);
    }
    Tensor g_probs(probs.shape());
    const double loss =
        soft_dice_loss(probs, gt, &g_probs) + cross_entropy_loss(probs, gt, &g_probs);
    g_logits->axpy(1.0, softmax_backward(probs, g_probs));
    return loss;
}

LabelVolume argmax_labels(const Tensor& probs) {
    const auto& s = probs.shape();
    if (s.size() != 4 || s[0] != kClasses)
        throw std::invalid_argument("argmax_labels: probs must be (4,D,H,W)");
    LabelVolume labels(s[1], s[2], s[3]);
    const std::size_t voxels = labels.size();
    for (std::size_t i = 0; i < voxels; ++i) {
        int best = 0;
        double best_p = probs[i];
        for (int c = 1; c < kClasses; ++c) {
            if (probs[c * voxels + i] > best_p) {
                best_p = probs[c * voxels + i];
                best = c;
            }
        }
        labels.v[i] = static_cast<std::uint8_t>(best);
    }
    return labels;
}

double round2(double v) { return std::floor(v * 100.0 + 0.5) / 100.0; }

DiceReport aggregate_report(const std::vector<DiceEntry>& entries) {
    DiceReport report;
    for (const auto& e : entries) {
        for (double v : {e.wt, e.tc, e.ec}) {
            if (!(v >= 0.0 && v <= 100.0))
                throw std::invalid_argument("aggregate_report: dice outside [0,100]");
        }
        DiceRow row;
        row.method = e.method;
        row.mask = e.mask;
        row.anchor = e.anchor;
        row.wt = e.wt;
        row.tc = e.tc;
        row.ec = e.ec;
        row.avg = (e.wt + e.tc + e.ec) / 3.0;
        report.rows.push_back(std::move(row));
    }
    return report;
}

double improvement(double avg_new, double avg_baseline) {
    if (!(avg_new >= 0.0 && avg_new <= 100.0) ||
        !(avg_baseline >= 0.0 && avg_baseline <= 100.0))
        throw std::invalid_argument("improvement: values must lie in [0,100]");
    return avg_new - avg_baseline;
}

double average_improvement(const std::vector<double>& deltas) {
    if (deltas.empty()) throw std::invalid_argument("average_improvement: empty list");
    double total = 0.0;
    for (double d : deltas) total += d;
    return total / static_cast<double>(deltas.size());
}

std::string DiceReport::to_csv() const {
    std::string csv = "method,mask,anchor,wt,tc,ec,avg,imp\n";
    for (const auto& row : rows) {
        csv += row.method + "," + row.mask.to_string() + "," + row.anchor + "," +
               format2(row.wt) + "," + format2(row.tc) + "," + format2(row.ec) + "," +
               format2(row.avg) + ",";
        if (row.has_improvement) csv += format2(row.improvement);
        csv += "\n";
    }
    return csv;
}

}  // namespace mmseg
