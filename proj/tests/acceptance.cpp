// Acceptance gate: one pass/fail line per criterion, nonzero exit on failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "mmseg/align/align.hpp"
#include "mmseg/core/rng.hpp"
#include "mmseg/data/phantom.hpp"
#include "mmseg/data/volume_io.hpp"
#include "mmseg/distill/distill.hpp"
#include "mmseg/metrics/segmetrics.hpp"
#include "mmseg/nets/model.hpp"
#include "mmseg/runner/config.hpp"
#include "mmseg/runner/trainer.hpp"
#include "mmseg/theory/theory.hpp"

using namespace mmseg;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("criterion %d: %s — %s\n", criterion, pass ? "PASS" : "FAIL",
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Criterion 1: report arithmetic reproduces the published comparison table.
// ---------------------------------------------------------------------------

struct TableRow {
    const char* method;
    const char* modality;
    // five column groups: original, no-alignment, normal-anchor, fixed-anchor,
    // adaptive-anchor; each (wt, tc, ec, printed avg); absent group -> avg < 0
    double g[5][4];
    double imp;       // printed improvement (adaptive avg - original avg)
    bool has_imp;
    bool imp_consistent;  // printed imp matches the printed avgs at 2 decimals
};

// Four printed Avg cells are arithmetically inconsistent with their own
// region columns by more than the half-up rounding tolerance; they are
// asserted as known outliers instead of silently skipped.
struct Outlier {
    const char* method;
    const char* modality;
    int group;
};
const std::vector<Outlier> kAvgOutliers = {
    {"PMKL", "T1", 0},      // printed 58.98, columns give 59.65
    {"PMKL", "T1ce", 1},    // printed 77.31, columns give 75.12
    {"SMU-Net", "T1ce", 2}, // printed 76.06, columns give 76.82
    {"Unimodal", "T2", 0},  // printed 64.91, columns give 64.88
};

const double kNoGroup = -1.0;

std::vector<TableRow> comparison_table() {
    // groups: {wt, tc, ec, avg}; avg = kNoGroup marks an absent group.
    return {
        {"Unimodal", "T1",
         {{72.96, 65.59, 37.77, 58.77}, {0, 0, 0, kNoGroup}, {0, 0, 0, kNoGroup},
          {0, 0, 0, kNoGroup}, {0, 0, 0, kNoGroup}}, 0, false, false},
        {"KD-Net", "T1",
         {{79.62, 59.83, 33.69, 57.72}, {72.07, 66.22, 40.13, 59.47},
          {74.21, 67.63, 43.24, 61.69}, {74.06, 64.21, 41.78, 60.02},
          {71.49, 65.18, 43.25, 59.97}}, 2.25, true, true},
        {"PMKL", "T1",
         {{73.31, 64.26, 41.37, 58.98}, {75.50, 65.98, 40.09, 60.53},
          {75.60, 65.59, 43.31, 61.50}, {75.06, 66.80, 41.43, 61.10},
          {72.04, 68.39, 47.66, 62.70}}, 3.97, true, false},
        {"ProtoKD", "T1",
         {{74.46, 67.34, 47.41, 63.07}, {73.64, 65.05, 43.04, 60.57},
          {72.95, 65.52, 42.92, 60.47}, {75.60, 66.95, 43.18, 61.91},
          {73.98, 67.36, 42.11, 61.15}}, -2.55, true, false},
        {"SMU-Net", "T1",
         {{74.33, 65.52, 40.22, 60.02}, {75.24, 68.52, 43.03, 62.26},
          {75.10, 66.41, 42.78, 61.43}, {75.15, 67.25, 41.71, 61.37},
          {75.02, 67.78, 43.30, 62.03}}, 2.01, true, true},
        {"Unimodal", "T2",
         {{82.65, 66.76, 45.23, 64.91}, {0, 0, 0, kNoGroup}, {0, 0, 0, kNoGroup},
          {0, 0, 0, kNoGroup}, {0, 0, 0, kNoGroup}}, 0, false, false},
        {"KD-Net", "T2",
         {{85.74, 66.79, 33.63, 62.05}, {80.50, 66.99, 48.02, 65.17},
          {83.23, 69.64, 43.18, 65.35}, {83.22, 70.72, 44.72, 66.22},
          {84.26, 71.30, 47.04, 67.53}}, 5.48, true, true},
        {"PMKL", "T2",
         {{81.00, 67.92, 47.09, 65.34}, {82.68, 67.14, 44.82, 64.88},
          {80.46, 69.06, 48.38, 65.97}, {82.47, 69.56, 45.78, 65.94},
          {83.77, 69.91, 45.17, 66.28}}, 0.94, true, true},
        {"ProtoKD", "T2",
         {{81.83, 68.29, 47.35, 65.82}, {81.82, 70.21, 48.78, 66.94},
          {83.82, 69.54, 45.03, 66.13}, {83.18, 67.96, 47.71, 66.28},
          {83.01, 70.26, 47.29, 66.85}}, 1.03, true, true},
        {"SMU-Net", "T2",
         {{85.57, 70.61, 47.33, 67.84}, {84.69, 70.34, 46.94, 67.32},
          {84.88, 69.96, 45.08, 66.64}, {85.09, 69.50, 44.85, 66.48},
          {84.45, 69.82, 47.09, 67.12}}, -0.62, true, false},
        {"Unimodal", "T1ce",
         {{71.41, 73.30, 76.36, 73.69}, {0, 0, 0, kNoGroup}, {0, 0, 0, kNoGroup},
          {0, 0, 0, kNoGroup}, {0, 0, 0, kNoGroup}}, 0, false, false},
        {"KD-Net", "T1ce",
         {{78.87, 80.83, 70.52, 76.74}, {72.14, 80.75, 77.61, 76.83},
          {72.49, 79.30, 74.46, 75.42}, {76.73, 81.64, 75.56, 77.98},
          {76.62, 80.15, 81.29, 79.36}}, 2.62, true, true},
        {"PMKL", "T1ce",
         {{70.50, 76.92, 75.54, 74.32}, {74.00, 78.64, 72.71, 77.31},
          {73.89, 80.86, 77.48, 77.41}, {77.46, 80.71, 75.40, 77.86},
          {75.97, 80.35, 76.44, 77.58}}, 3.26, true, true},
        {"ProtoKD", "T1ce",
         {{74.67, 81.48, 76.01, 77.39}, {75.16, 80.47, 76.74, 77.45},
          {76.52, 80.85, 75.73, 77.70}, {75.98, 79.41, 76.99, 77.46},
          {74.91, 81.44, 77.39, 77.91}}, 0.52, true, true},
        {"SMU-Net", "T1ce",
         {{75.33, 79.41, 76.22, 76.99}, {76.65, 80.08, 76.01, 77.58},
          {75.68, 79.86, 74.92, 76.06}, {78.63, 74.85, 76.51, 76.66},
          {75.83, 80.13, 75.57, 77.18}}, 0.09, true, false},
        {"Unimodal", "Flair",
         {{81.91, 63.57, 40.74, 62.07}, {0, 0, 0, kNoGroup}, {0, 0, 0, kNoGroup},
          {0, 0, 0, kNoGroup}, {0, 0, 0, kNoGroup}}, 0, false, false},
        {"KD-Net", "Flair",
         {{88.28, 64.37, 33.39, 62.01}, {84.97, 63.16, 41.44, 63.19},
          {84.84, 64.67, 44.15, 64.56}, {85.46, 66.77, 43.99, 65.41},
          {84.96, 66.58, 42.16, 64.57}}, 2.56, true, true},
        {"PMKL", "Flair",
         {{84.11, 62.21, 41.35, 62.56}, {84.74, 67.07, 43.42, 65.07},
          {84.09, 66.78, 42.13, 64.33}, {83.84, 68.89, 41.41, 64.71},
          {85.70, 68.44, 43.57, 65.90}}, 3.34, true, true},
        {"ProtoKD", "Flair",
         {{84.64, 65.56, 42.30, 64.17}, {84.59, 67.70, 40.91, 64.39},
          {84.62, 64.32, 37.76, 62.23}, {84.23, 67.73, 41.45, 64.47},
          {85.62, 68.71, 41.38, 65.23}}, 1.06, true, true},
        {"SMU-Net", "Flair",
         {{85.74, 62.89, 38.12, 62.25}, {85.70, 63.50, 39.43, 62.88},
          {85.99, 65.74, 40.55, 64.09}, {86.78, 63.83, 40.82, 63.81},
          {86.89, 64.88, 41.41, 64.39}}, 2.14, true, true},
    };
}

bool is_outlier(const TableRow& row, int group) {
    for (const auto& o : kAvgOutliers) {
        if (row.method == std::string(o.method) &&
            row.modality == std::string(o.modality) && group == o.group)
            return true;
    }
    return false;
}

void criterion1() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto table = comparison_table();
    bool ok = true;
    std::string why;

    int cells = 0, outliers_seen = 0;
    for (const auto& row : table) {
        for (int gi = 0; gi < 5; ++gi) {
            if (row.g[gi][3] == kNoGroup) continue;
            DiceEntry e;
            e.method = row.method;
            e.mask = ModalityMask::full(4);
            e.anchor = "table";
            e.wt = row.g[gi][0];
            e.tc = row.g[gi][1];
            e.ec = row.g[gi][2];
            const double computed = round2(aggregate_report({e}).rows[0].avg);
            const double diff = std::abs(computed - row.g[gi][3]);
            if (is_outlier(row, gi)) {
                ++outliers_seen;
                if (diff <= 0.0100001) {
                    ok = false;
                    why = std::string("expected-outlier cell agrees: ") + row.method;
                }
            } else if (diff > 0.0100001) {
                ok = false;
                why = std::string("avg mismatch ") + row.method + "/" + row.modality +
                      " group " + std::to_string(gi) + ": computed " + fmt(computed) +
                      " vs printed " + fmt(row.g[gi][3]);
            }
            ++cells;
        }
    }
    if (outliers_seen != static_cast<int>(kAvgOutliers.size())) ok = false;

    // anchored spot checks
    {
        DiceEntry e;
        e.method = "Unimodal";
        e.mask = ModalityMask::full(4);
        e.anchor = "table";
        e.wt = 72.96;
        e.tc = 65.59;
        e.ec = 37.77;
        if (round2(aggregate_report({e}).rows[0].avg) != 58.77) {
            ok = false;
            why = "plain-supervision T1 average != 58.77";
        }
    }
    if (round2(improvement(59.97, 57.72)) != 2.25) {
        ok = false;
        why = "KD-Net T1 improvement != 2.25";
    }
    if (round2(improvement(62.03, 60.02)) != 2.01) {
        ok = false;
        why = "SMU-Net T1 improvement != 2.01";
    }

    // improvement column: self-consistent rows reproduce exactly at 2 decimals
    std::vector<double> printed_imps;
    int consistent = 0;
    for (const auto& row : table) {
        if (!row.has_imp) continue;
        printed_imps.push_back(row.imp);
        const double computed = round2(improvement(row.g[4][3], row.g[0][3]));
        const bool match = std::abs(computed - row.imp) < 1e-9;
        if (row.imp_consistent) {
            ++consistent;
            if (!match) {
                ok = false;
                why = std::string("improvement mismatch ") + row.method + "/" +
                      row.modality;
            }
        } else if (match) {
            ok = false;
            why = std::string("expected-inconsistent improvement agrees: ") + row.method;
        }
    }
    if (printed_imps.size() != 16 || consistent != 12) ok = false;
    const double mean_imp = average_improvement(printed_imps);
    if (std::abs(mean_imp - 1.75) > 0.0100001) {
        ok = false;
        why = "mean improvement " + fmt(mean_imp) + " not within 0.01 of 1.75";
    }

    const double secs = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - t0).count();
    if (secs >= 1.0) {
        ok = false;
        why = "runtime " + fmt(secs) + "s >= 1s";
    }
    report(1, ok,
           ok ? "table arithmetic: " + std::to_string(cells) +
                    " avg cells, 12/16 improvement rows exact, mean improvement " +
                    fmt(mean_imp) + " (" + fmt(secs) + "s)"
              : why);
}

// ---------------------------------------------------------------------------
// Criterion 2: information-theory verification suites.
// ---------------------------------------------------------------------------

void criterion2() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string why;

    int sl_trials = 0, sl_violations = 0;
    double sl_slack = 0.0;
    int j = 2;
    for (int trials : {334, 333, 333}) {
        const auto rec = theory::check_single_letterization(
            trials, j, 4, mix_seed(2024, static_cast<std::uint64_t>(j)));
        sl_trials += rec.trials;
        sl_violations += rec.violations;
        sl_slack = std::max(sl_slack, rec.max_slack);
        ++j;
    }
    if (sl_trials != 1000 || sl_violations != 0) {
        ok = false;
        why = "single-letterization: " + std::to_string(sl_violations) +
              " violations in " + std::to_string(sl_trials) + " trials";
    }

    const auto elbo = theory::check_elbo_tightness(200, 4, 4242, 10000);
    if (elbo.trials != 200 || elbo.violations != 0) {
        ok = false;
        why = "elbo tightness: " + std::to_string(elbo.violations) + " violations";
    }

    const double secs = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - t0).count();
    if (secs >= 300.0) {
        ok = false;
        why = "runtime " + fmt(secs) + "s >= 5min";
    }
    report(2, ok,
           ok ? "1000 single-letterization trials (J=2,3,4) and 200 elbo trials, "
                "0 violations, max exact slack " + fmt(sl_slack) + " (" +
                    fmt(secs) + "s)"
              : why);
}

// ---------------------------------------------------------------------------
// Criterion 3: loss oracles vs closed forms and Monte Carlo.
// ---------------------------------------------------------------------------

void criterion3() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string why;

    if (std::abs(theory::kl_gaussian(1.0, 1.0, 0.0, 1.0) - 0.5) > 1e-4) {
        ok = false;
        why = "kl_gaussian(1,1;0,1) != 0.5";
    }
    if (std::abs(theory::kl_gaussian(0.0, 2.0, 0.0, 1.0) - 0.8069) > 1e-4) {
        ok = false;
        why = "kl_gaussian(0,2;0,1) != 0.8069";
    }

    Rng rng(555);
    int agreements = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const double mu = rng.uniform(-1.5, 1.5);
        const double sigma = std::exp(rng.uniform(-0.8, 0.8));
        Tensor m({1}, {mu});
        Tensor lv({1}, {2.0 * std::log(sigma)});
        const double closed = loss_align_normal(m, lv, NormalVariant::closed_form);

        Rng mc_rng(mix_seed(556, static_cast<std::uint64_t>(trial)));
        const auto est = theory::mc_kl_estimate(
            [&](Rng& r) { return mu + sigma * r.normal(); },
            [&](double x) {
                const double d = (x - mu) / sigma;
                return -0.5 * d * d - std::log(sigma) - 0.5 * std::log(2.0 * M_PI);
            },
            [](double x) { return -0.5 * x * x - 0.5 * std::log(2.0 * M_PI); },
            100000, mc_rng);
        if (std::abs(est.estimate - closed) < 3.0 * est.std_error + 1e-9) ++agreements;
    }
    if (agreements != 50) {
        ok = false;
        why = "closed-form vs monte carlo: only " + std::to_string(agreements) +
              "/50 within 3 standard errors";
    }

    const double secs = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - t0).count();
    if (secs >= 60.0) {
        ok = false;
        why = "runtime " + fmt(secs) + "s >= 1min";
    }
    report(3, ok,
           ok ? "gaussian KL oracles exact to 1e-4; 50/50 monte-carlo agreements (" +
                    fmt(secs) + "s)"
              : why);
}

// ---------------------------------------------------------------------------
// Criterion 4: gradient checks for every differentiable loss.
// ---------------------------------------------------------------------------

// Central-difference check of `analytic` against `f` at coordinates of `x`.
bool fd_check(Tensor& x, const std::function<double()>& f, const Tensor& analytic,
              double step, std::string& why, const std::string& name) {
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double s = x[i];
        x[i] = s + step;
        const double fp = f();
        x[i] = s - step;
        const double fm = f();
        x[i] = s;
        const double fd = (fp - fm) / (2 * step);
        const double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-6});
        if (std::abs(fd - analytic[i]) / denom >= 1e-4) {
            why = name + " gradient mismatch at " + std::to_string(i);
            return false;
        }
    }
    return true;
}

void criterion4() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string why;
    Rng rng(808);
    const double step = 1e-3;
    auto rand_tensor = [&](std::vector<int> shape, double lo, double hi) {
        Tensor t(shape);
        for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
        return t;
    };

    {  // fixed-anchor MSE
        Tensor a = rand_tensor({16}, -2, 2), b = rand_tensor({16}, -2, 2);
        Tensor ga({16}), gb({16});
        loss_align_fixed_grad(a, b, ga, gb);
        ok = ok && fd_check(a, [&] { return loss_align_fixed(a, b); }, ga, step, why,
                            "fixed-anchor(z_j)");
        ok = ok && fd_check(b, [&] { return loss_align_fixed(a, b); }, gb, step, why,
                            "fixed-anchor(z_k)");
    }
    {  // adaptive anchor: latents and theta
        std::vector<Tensor> z{rand_tensor({8}, -2, 2), rand_tensor({8}, -2, 2),
                              rand_tensor({8}, -2, 2)};
        Tensor theta = rand_tensor({3}, -1, 1);
        std::vector<Tensor> gz{Tensor({8}), Tensor({8}), Tensor({8})};
        Tensor gtheta({3});
        loss_align_adaptive_grad(z, theta, 1, gz, gtheta);
        for (int jj = 0; jj < 3 && ok; ++jj) {
            ok = fd_check(z[jj], [&] { return loss_align_adaptive(z, theta, 1); },
                          gz[jj], step, why, "adaptive(z)");
        }
        ok = ok && fd_check(theta, [&] { return loss_align_adaptive(z, theta, 1); },
                            gtheta, step, why, "adaptive(theta)");
    }
    for (auto variant : {NormalVariant::closed_form, NormalVariant::paper_literal}) {
        Tensor mu = rand_tensor({16}, -2, 2), lv = rand_tensor({16}, -1, 1);
        Tensor gm({16}), gl({16});
        loss_align_normal_grad(mu, lv, variant, gm, gl);
        ok = ok && fd_check(mu, [&] { return loss_align_normal(mu, lv, variant); },
                            gm, step, why, "gaussian-anchor(mu)");
        ok = ok && fd_check(lv, [&] { return loss_align_normal(mu, lv, variant); },
                            gl, step, why, "gaussian-anchor(logvar)");
    }
    {  // soft dice + cross-entropy through the logits
        LabelVolume gt(2, 2, 2);
        for (std::size_t i = 0; i < gt.size(); ++i)
            gt.v[i] = static_cast<std::uint8_t>(rng.uniform_index(4));
        Tensor logits = rand_tensor({4, 2, 2, 2}, -1, 1);
        Tensor g(logits.shape());
        segmentation_loss(logits, gt, &g);
        ok = ok && fd_check(logits, [&] { return segmentation_loss(logits, gt); }, g,
                            step, why, "dice+cross-entropy");

        // cross-entropy alone, through softmax
        Tensor lg = rand_tensor({4, 2, 2, 2}, -1, 1);
        const Tensor probs = softmax_channels(lg);
        Tensor gp(probs.shape());
        cross_entropy_loss(probs, gt, &gp);
        const Tensor glg = softmax_backward(probs, gp);
        ok = ok && fd_check(
                       lg, [&] { return cross_entropy_loss(softmax_channels(lg), gt); },
                       glg, step, why, "cross-entropy");

        // soft dice alone, through softmax
        Tensor lg2 = rand_tensor({4, 2, 2, 2}, -1, 1);
        const Tensor probs2 = softmax_channels(lg2);
        Tensor gp2(probs2.shape());
        soft_dice_loss(probs2, gt, &gp2);
        const Tensor glg2 = softmax_backward(probs2, gp2);
        ok = ok && fd_check(
                       lg2, [&] { return soft_dice_loss(softmax_channels(lg2), gt); },
                       glg2, step, why, "soft dice");
    }
    {  // latent distillation, both modes
        Tensor z = rand_tensor({16}, -2, 2), t = rand_tensor({16}, -2, 2);
        Tensor g({16});
        loss_latent_distill_mse_grad(z, t, g);
        ok = ok && fd_check(z, [&] { return loss_latent_distill_mse(z, t); }, g, step,
                            why, "latent distill mse");

        std::vector<Tensor> sb, tb;
        for (int b = 0; b < 3; ++b) {
            sb.push_back(rand_tensor({2, 2, 1, 1}, -2, 2));
            tb.push_back(rand_tensor({2, 2, 1, 1}, -2, 2));
        }
        std::vector<Tensor> gs{Tensor({2, 2, 1, 1}), Tensor({2, 2, 1, 1}),
                               Tensor({2, 2, 1, 1})};
        loss_latent_distill_moment_kl_grad(sb, tb, gs);
        for (int b = 0; b < 3 && ok; ++b) {
            ok = fd_check(sb[b],
                          [&] { return loss_latent_distill_moment_kl(sb, tb); },
                          gs[b], step, why, "latent distill moment-kl");
        }
    }
    {  // soft-label distillation through the logits
        Tensor lg = rand_tensor({4, 3, 1, 1}, -1, 1);
        const Tensor teacher = softmax_channels(rand_tensor({4, 3, 1, 1}, -1, 1));
        const double T = 2.0;
        const Tensor probs = softmax_channels(lg);
        Tensor gp(probs.shape());
        loss_soft_label_grad(probs, teacher, T, gp);
        const Tensor glg = softmax_backward(probs, gp);
        ok = ok && fd_check(
                       lg,
                       [&] { return loss_soft_label(softmax_channels(lg), teacher, T); },
                       glg, step, why, "soft-label");
    }

    const double secs = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - t0).count();
    if (secs >= 120.0) {
        ok = false;
        why = "runtime " + fmt(secs) + "s >= 2min";
    }
    report(4, ok,
           ok ? "all alignment, segmentation, and distillation losses match central "
                "finite differences at 1e-4 relative (" + fmt(secs) + "s)"
              : why);
}

// ---------------------------------------------------------------------------
// Criteria 5-7: reference desk-scale training study (filled in below).
// ---------------------------------------------------------------------------

// Reference configuration for the training study. Model capacity matters:
// smaller encoders fail to learn the smallest tumor region reliably, which
// voids any statement about distillation.
TrainConfig reference_config(AnchorKind anchor, std::uint64_t seed) {
    TrainConfig c;
    c.dataset.count = 20;
    c.dataset.phantom.d = c.dataset.phantom.h = c.dataset.phantom.w = 24;
    c.crop_d = c.crop_h = c.crop_w = 16;
    c.holdout = 6;
    // Students get fewer epochs than the teacher: in the converged regime the
    // distillation signal carries nothing the student has not already learned
    // from the labels, and the latent term can only hurt.
    c.epochs = 40;
    c.student_epochs = 25;
    c.model.encoder.base_channels = 16;
    c.model.encoder.max_channels = 32;
    c.model.encoder.latent_channels = 16;
    c.model.predictor_base_channels = 16;
    c.model.anchor.kind = anchor;
    c.model.anchor.base_k = 2;
    c.distill.latent_weight = 0.3;
    c.distill.soft_label_weight = 0.1;
    c.distill.temperature = 2.0;
    c.distill.fused_teacher_target = true;
    c.seed = seed;
    return c;
}

const std::vector<std::uint64_t> kStudySeeds = {11, 12, 13};

struct SeedStudy {
    double teacher_secs = 0;  // time spent training the four teachers
    double gap_none = 0, gap_fixed = 0, gap_adaptive = 0, gap_normal = 0;
    std::vector<double> final_weights;            // adaptive anchor weights
    bool weights_on_simplex = true;               // sum == J throughout training
    std::vector<double> distilled, plain, unaligned;  // avg dice per mask
};

double final_gap(const TrainResult& r) { return r.log.back().gap; }

SeedStudy run_seed_study(std::uint64_t seed) {
    SeedStudy s;

    const auto t0 = std::chrono::steady_clock::now();
    auto teacher_none = train_teacher(reference_config(AnchorKind::none, seed));
    auto teacher_fixed = train_teacher(reference_config(AnchorKind::fixed_modality, seed));
    auto teacher_adaptive = train_teacher(reference_config(AnchorKind::adaptive, seed));
    auto teacher_normal =
        train_teacher(reference_config(AnchorKind::standard_normal, seed));
    s.teacher_secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    s.gap_none = final_gap(teacher_none);
    s.gap_fixed = final_gap(teacher_fixed);
    s.gap_adaptive = final_gap(teacher_adaptive);
    s.gap_normal = final_gap(teacher_normal);

    for (const auto& entry : teacher_adaptive.log) {
        double sum = 0.0;
        for (double w : entry.weights) sum += w;
        if (std::abs(sum - 4.0) > 1e-6) s.weights_on_simplex = false;
    }
    s.final_weights = teacher_adaptive.log.back().weights;

    const TrainConfig eval_cfg = reference_config(AnchorKind::none, seed);
    const auto data = build_dataset(eval_cfg);
    std::vector<MultiModalSample> train_set, eval_set;
    split_dataset(data, eval_cfg.holdout, train_set, eval_set);

    auto avg_for_mask = [&](SegModel& model, const ModalityMask& mask) {
        const auto rep = evaluate(model, eval_set, {mask}, eval_cfg);
        return rep.rows[0].avg;
    };

    for (int k = 0; k < 4; ++k) {
        const ModalityMask mask = ModalityMask::single(k, 4);
        const TrainConfig cfg = reference_config(AnchorKind::none, seed);
        auto distilled = train_student(cfg, &teacher_adaptive.model, mask);
        auto unaligned = train_student(cfg, &teacher_none.model, mask);
        auto plain = train_student(cfg, nullptr, mask);
        s.distilled.push_back(avg_for_mask(distilled.model, mask));
        s.unaligned.push_back(avg_for_mask(unaligned.model, mask));
        s.plain.push_back(avg_for_mask(plain.model, mask));
    }
    return s;
}

void criteria567() {
    std::vector<SeedStudy> studies;
    for (auto seed : kStudySeeds) studies.push_back(run_seed_study(seed));

    // Criterion 5: fixed- and adaptive-anchor teachers halve the gap; the
    // standard-normal anchor carries no such guarantee and is only reported.
    int majority = 0;
    double teacher_secs = 0;
    std::string gaps;
    for (std::size_t i = 0; i < studies.size(); ++i) {
        const auto& s = studies[i];
        teacher_secs += s.teacher_secs;
        const bool pass = s.gap_fixed <= 0.5 * s.gap_none &&
                          s.gap_adaptive <= 0.5 * s.gap_none;
        if (pass) ++majority;
        gaps += (i ? "; " : "") + std::string("seed ") +
                std::to_string(kStudySeeds[i]) + ": none " + fmt(s.gap_none) +
                ", fixed " + fmt(s.gap_fixed) + ", adaptive " + fmt(s.gap_adaptive) +
                ", normal " + fmt(s.gap_normal);
    }
    const bool within_budget = teacher_secs < 3600.0;
    report(5, majority >= 2 && within_budget,
           "gap halved by fixed and adaptive anchors in " + std::to_string(majority) +
               "/3 seeds (" + gaps + "; teacher training " + fmt(teacher_secs) + "s)");

    // Criterion 6: the informative modality gets the largest adaptive weight.
    const int informative = TrainConfig().dataset.phantom.informative_modality;
    int largest_hits = 0;
    bool simplex_ok = true;
    std::string weights;
    for (std::size_t i = 0; i < studies.size(); ++i) {
        const auto& s = studies[i];
        simplex_ok = simplex_ok && s.weights_on_simplex;
        const int argmax = static_cast<int>(
            std::max_element(s.final_weights.begin(), s.final_weights.end()) -
            s.final_weights.begin());
        if (argmax == informative) ++largest_hits;
        weights += (i ? "; " : "") + std::string("seed ") +
                   std::to_string(kStudySeeds[i]) + ": w=(";
        for (std::size_t j = 0; j < s.final_weights.size(); ++j)
            weights += (j ? "," : "") + fmt(s.final_weights[j]);
        weights += ")";
    }
    report(6, largest_hits >= 2 && simplex_ok,
           "largest weight on modality " + std::to_string(informative) + " in " +
               std::to_string(largest_hits) + "/3 seeds, simplex " +
               (simplex_ok ? "held" : "VIOLATED") + " (" + weights + ")");

    // Criterion 7: distilled students beat the plain baseline on average and
    // stay within the noise allowance of the unaligned teacher's students.
    double sum_distilled = 0, sum_plain = 0, sum_unaligned = 0;
    int n = 0;
    for (const auto& s : studies) {
        for (std::size_t k = 0; k < s.distilled.size(); ++k, ++n) {
            sum_distilled += s.distilled[k];
            sum_plain += s.plain[k];
            sum_unaligned += s.unaligned[k];
        }
    }
    const double mean_distilled = sum_distilled / n;
    const double mean_plain = sum_plain / n;
    const double mean_unaligned = sum_unaligned / n;
    const bool pass7 =
        mean_distilled >= mean_plain && mean_distilled >= mean_unaligned - 0.5;
    report(7, pass7,
           "mean avg-dice over 3 seeds x 4 students: distilled " +
               fmt(mean_distilled) + ", plain baseline " + fmt(mean_plain) +
               ", unaligned-teacher students " + fmt(mean_unaligned));
}

// ---------------------------------------------------------------------------
// Criterion 8: determinism and formats.
// ---------------------------------------------------------------------------

void criterion8() {
    bool ok = true;
    std::string why;

    TrainConfig c;
    c.dataset.count = 6;
    c.dataset.phantom.d = c.dataset.phantom.h = c.dataset.phantom.w = 16;
    c.dataset.phantom.tumor_radius_min = 4.0;
    c.dataset.phantom.tumor_radius_max = 6.0;
    c.crop_d = c.crop_h = c.crop_w = 8;
    c.model.encoder.base_channels = 4;
    c.model.encoder.max_channels = 8;
    c.model.encoder.latent_channels = 4;
    c.model.predictor_base_channels = 4;
    c.epochs = 3;
    c.student_epochs = 3;
    c.holdout = 2;
    c.seed = 99;
    c.model.anchor.kind = AnchorKind::adaptive;
    c.model.anchor.base_k = 2;

    auto run_artifacts = [&](std::string& report_csv, std::string& lat_csv,
                             std::string& ppm_bytes) {
        auto r = train_teacher(c);
        const auto data = build_dataset(c);
        std::vector<MultiModalSample> train_set, eval_set;
        split_dataset(data, c.holdout, train_set, eval_set);
        const auto masks = enumerate_modality_masks(4);
        report_csv = evaluate(r.model, eval_set, masks, c).to_csv();
        lat_csv = latents_csv(r.model, eval_set, c);

        const auto dir = std::filesystem::temp_directory_path() / "mmseg_acceptance";
        std::filesystem::create_directories(dir);
        const std::string prefix = (dir / "slice").string();
        export_slices(eval_set[0], &eval_set[0].labels, 0, 8, prefix);
        std::ifstream in(prefix + "_gt.ppm", std::ios::binary);
        ppm_bytes.assign((std::istreambuf_iterator<char>(in)), {});
    };

    std::string rep1, lat1, ppm1, rep2, lat2, ppm2;
    run_artifacts(rep1, lat1, ppm1);
    run_artifacts(rep2, lat2, ppm2);
    if (rep1 != rep2 || rep1.empty()) {
        ok = false;
        why = "report csv not byte-identical across reruns";
    }
    if (lat1 != lat2 || lat1.empty()) {
        ok = false;
        why = "latents csv not byte-identical across reruns";
    }
    if (ppm1 != ppm2 || ppm1.empty()) {
        ok = false;
        why = "ppm slice not byte-identical across reruns";
    }

    // 15 rows in canonical mask order
    {
        std::istringstream in(rep1);
        std::string line;
        std::getline(in, line);  // header
        const auto masks = enumerate_modality_masks(4);
        int rows = 0;
        while (std::getline(in, line)) {
            const auto c1 = line.find(',');
            const auto c2 = line.find(',', c1 + 1);
            const std::string mask = line.substr(c1 + 1, c2 - c1 - 1);
            if (rows < 15 && mask != masks[rows].to_string()) {
                ok = false;
                why = "row " + std::to_string(rows) + " mask " + mask +
                      " out of canonical order";
            }
            ++rows;
        }
        if (rows != 15) {
            ok = false;
            why = "expected 15 report rows, got " + std::to_string(rows);
        }
    }

    // volume container round-trips bit-exactly
    {
        const auto dir = std::filesystem::temp_directory_path() / "mmseg_acceptance";
        std::filesystem::create_directories(dir);
        const std::string p1 = (dir / "rt1.vol").string();
        const std::string p2 = (dir / "rt2.vol").string();
        PhantomConfig pc;
        pc.d = pc.h = pc.w = 12;
        pc.seed = 7;
        const auto sample = generate_phantom(pc);
        write_volumes(p1, sample.volumes);
        const auto back = read_volumes(p1);
        write_volumes(p2, back);
        std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
        const std::string b1((std::istreambuf_iterator<char>(f1)), {});
        const std::string b2((std::istreambuf_iterator<char>(f2)), {});
        if (b1 != b2 || b1.empty()) {
            ok = false;
            why = "volume container round-trip not bit-exact";
        }
    }

    report(8, ok,
           ok ? "byte-identical artifacts across reruns; 15 canonical report rows; "
                "bit-exact volume round-trip"
              : why);
}

}  // namespace

int main(int argc, char** argv) {
    // "--skip-training" runs only the fast criteria; development aid, not the gate.
    const bool skip_training = argc > 1 && std::string(argv[1]) == "--skip-training";
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    if (!skip_training) criteria567();
    criterion8();
    if (g_failures == 0) {
        std::printf(skip_training
                        ? "acceptance: fast criteria passed (training criteria skipped)\n"
                        : "acceptance: all 8 criteria passed\n");
        return 0;
    }
    std::printf("acceptance: %d criterion(s) failed\n", g_failures);
    return 1;
}
