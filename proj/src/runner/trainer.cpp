#include "mmseg/runner/trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "mmseg/align/align.hpp"
#include "mmseg/data/phantom.hpp"
#include "mmseg/data/volume_io.hpp"
#include "mmseg/distill/distill.hpp"

namespace mmseg {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

// Map the fused-latent gradient back onto one modality's latent values.
Tensor training_fusion_grad(const SegModel& model, const Tensor& g_fused, int modality) {
    if (model.cfg.fusion == FusionMode::mean) return g_fused;
    const auto& fs = g_fused.shape();
    const int lc = model.cfg.encoder.latent_channels;
    Tensor g({lc, fs[1], fs[2], fs[3]});
    const std::size_t block = g.numel();
    std::copy_n(g_fused.data() + static_cast<std::size_t>(modality) * block, block,
                g.data());
    return g;
}

// Fused gradient -> per-present-modality latent gradient under a mask.
Tensor fuse_grad(const SegModel& model, const Tensor& g_fused, int modality,
                 int present_count) {
    if (model.cfg.fusion == FusionMode::mean) {
        Tensor g = g_fused;
        g.scale(1.0 / static_cast<double>(present_count));
        return g;
    }
    return training_fusion_grad(model, g_fused, modality);
}

std::vector<double> channel_means(const Tensor& latent) {
    const auto& s = latent.shape();
    const int c_count = s[0];
    const std::size_t spatial = latent.numel() / c_count;
    std::vector<double> out(c_count, 0.0);
    for (int c = 0; c < c_count; ++c) {
        const double* p = latent.data() + c * spatial;
        for (std::size_t i = 0; i < spatial; ++i) out[c] += p[i];
        out[c] /= static_cast<double>(spatial);
    }
    return out;
}

void check_finite(double loss, int epoch, std::size_t batch) {
    if (!std::isfinite(loss)) {
        throw std::runtime_error("training diverged: non-finite loss " +
                                 std::to_string(loss) + " at epoch " +
                                 std::to_string(epoch) + " batch " +
                                 std::to_string(batch));
    }
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(seed, 0x0bde + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i) {
        std::swap(order[i - 1], order[rng.uniform_index(i)]);
    }
    return order;
}

std::uint64_t crop_seed(std::uint64_t base, int epoch, std::size_t idx) {
    return mix_seed(base, 0x9000 + static_cast<std::uint64_t>(epoch) * 100003 +
                              static_cast<std::uint64_t>(idx));
}

double region_avg_dice(const Tensor& probs, const LabelVolume& gt) {
    const LabelVolume pred = argmax_labels(probs);
    const RegionMasks pr = derive_regions(pred);
    const RegionMasks gr = derive_regions(gt);
    return (dice_score(pr.wt, gr.wt) + dice_score(pr.tc, gr.tc) +
            dice_score(pr.ec, gr.ec)) /
           3.0 * 100.0;
}

}  // namespace

void Adam::step(SegModel& model, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    std::size_t slot = 0;
    model.visit_params([&](const std::string&, Tensor& p, Tensor& g) {
        if (slot >= m_.size()) {
            m_.emplace_back(p.shape());
            v_.emplace_back(p.shape());
        }
        if (!m_[slot].same_shape(p)) throw std::runtime_error("Adam: model shape changed");
        kernels::adam_update(p.numel(), p.data(), g.data(), m_[slot].data(),
                             v_[slot].data(), lr, beta1_, beta2_, eps_, bc1, bc2);
        ++slot;
    });
    ++model.step_count;
}

std::string TrainResult::weights_csv() const {
    std::ostringstream out;
    const std::size_t j_count = log.empty() ? 0 : log.front().weights.size();
    out << "epoch";
    for (std::size_t j = 0; j < j_count; ++j) out << ",w_" << (j + 1);
    out << "\n";
    for (const auto& e : log) {
        out << e.epoch;
        for (double w : e.weights) out << "," << fmt(w);
        out << "\n";
    }
    return out.str();
}

std::string TrainResult::log_csv() const {
    std::ostringstream out;
    const std::size_t seg_count = log.empty() ? 0 : log.front().seg_loss.size();
    out << "epoch,lr";
    for (std::size_t j = 0; j < seg_count; ++j) out << ",seg_" << j;
    out << ",align,distill,gap\n";
    for (const auto& e : log) {
        out << e.epoch << "," << fmt(e.lr);
        for (double s : e.seg_loss) out << "," << fmt(s);
        out << "," << fmt(e.align_loss) << "," << fmt(e.distill_loss) << ","
            << fmt(e.gap) << "\n";
    }
    return out.str();
}

std::vector<MultiModalSample> build_dataset(const TrainConfig& config) {
    std::vector<MultiModalSample> samples;
    if (config.dataset.kind == DatasetSpec::Kind::synthetic) {
        for (int i = 0; i < config.dataset.count; ++i) {
            PhantomConfig p = config.dataset.phantom;
            p.seed = mix_seed(config.seed, 0xda7a + static_cast<std::uint64_t>(i));
            MultiModalSample s = generate_phantom(p);
            for (auto& vol : s.volumes) vol = normalize_intensity(vol);
            s.sample_id = "synth" + std::to_string(i);
            samples.push_back(std::move(s));
        }
        return samples;
    }

    // directory ingestion: every "<id>_label.vol" names one subject
    std::vector<std::string> ids;
    const std::string suffix = "_label.vol";
    for (const auto& entry : std::filesystem::directory_iterator(config.dataset.path)) {
        const std::string name = entry.path().filename().string();
        if (name.size() > suffix.size() &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
            ids.push_back(name.substr(0, name.size() - suffix.size()));
        }
    }
    std::sort(ids.begin(), ids.end());
    if (ids.empty())
        throw std::runtime_error("build_dataset: no subjects in " + config.dataset.path);
    for (const auto& id : ids) {
        MultiModalSample s =
            read_subject_dir(config.dataset.path, id, config.dataset.modality_count);
        for (auto& vol : s.volumes) vol = normalize_intensity(vol);
        samples.push_back(std::move(s));
    }
    return samples;
}

void split_dataset(const std::vector<MultiModalSample>& all, int holdout,
                   std::vector<MultiModalSample>& train_set,
                   std::vector<MultiModalSample>& eval_set) {
    if (holdout < 0 || holdout >= static_cast<int>(all.size()))
        throw std::invalid_argument("split_dataset: holdout must be < dataset size");
    train_set.assign(all.begin(), all.end() - holdout);
    eval_set.assign(all.end() - holdout, all.end());
    if (eval_set.empty()) eval_set = train_set;  // gap tracking still needs data
}

MultiModalSample center_crop(const MultiModalSample& sample, int cd, int ch, int cw) {
    const auto& s = sample.volumes.at(0).shape();
    if (cd > s[0] || ch > s[1] || cw > s[2])
        throw std::invalid_argument("center_crop: crop larger than volume");
    const int z0 = (s[0] - cd) / 2, y0 = (s[1] - ch) / 2, x0 = (s[2] - cw) / 2;

    MultiModalSample out;
    out.sample_id = sample.sample_id;
    for (const auto& vol : sample.volumes) {
        Tensor c({cd, ch, cw});
        for (int z = 0; z < cd; ++z) {
            for (int y = 0; y < ch; ++y) {
                for (int x = 0; x < cw; ++x) {
                    c[(static_cast<std::size_t>(z) * ch + y) * cw + x] =
                        vol[(static_cast<std::size_t>(z0 + z) * s[1] + (y0 + y)) * s[2] +
                            (x0 + x)];
                }
            }
        }
        out.volumes.push_back(std::move(c));
    }
    out.labels = LabelVolume(cd, ch, cw);
    for (int z = 0; z < cd; ++z) {
        for (int y = 0; y < ch; ++y) {
            for (int x = 0; x < cw; ++x) {
                out.labels.at(z, y, x) = sample.labels.at(z0 + z, y0 + y, x0 + x);
            }
        }
    }
    return out;
}

double compute_modality_gap(SegModel& model, const std::vector<MultiModalSample>& samples,
                            const TrainConfig& config) {
    const int j_count = model.cfg.modality_count;
    std::vector<std::vector<std::vector<double>>> sets(j_count);
    for (const auto& sample : samples) {
        const MultiModalSample crop =
            center_crop(sample, config.crop_d, config.crop_h, config.crop_w);
        for (int j = 0; j < j_count; ++j) {
            const LatentFeatures lat = model.encode(crop.volumes[j], j);
            sets[j].push_back(channel_means(lat.values));
        }
    }
    return modality_gap(sets);
}

TrainResult train_teacher(const TrainConfig& config) {
    config.validate();
    ModelConfig mc = config.model;
    mc.modality_count = config.modality_count();

    TrainResult result;
    result.model = SegModel::create(mc, config.seed);
    SegModel& model = result.model;
    const int j_count = mc.modality_count;
    const double lambda = config.lambda_align;

    const auto all = build_dataset(config);
    std::vector<MultiModalSample> train_set, eval_set;
    split_dataset(all, config.holdout, train_set, eval_set);

    Adam opt;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = config.optim.lr_at(epoch);
        const auto order = epoch_order(train_set.size(), config.seed, epoch);

        std::vector<double> seg_sum(j_count, 0.0);
        double align_sum = 0.0;
        std::size_t seen = 0, batch_no = 0;

        for (std::size_t start = 0; start < order.size();
             start += config.optim.batch_size, ++batch_no) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(config.optim.batch_size));
            const double inv_b = 1.0 / static_cast<double>(stop - start);
            model.zero_grad();

            double batch_loss = 0.0;
            for (std::size_t bi = start; bi < stop; ++bi) {
                const std::size_t idx = order[bi];
                const MultiModalSample crop =
                    random_crop(train_set[idx], config.crop_d, config.crop_h,
                                config.crop_w, crop_seed(config.seed, epoch, idx));

                std::vector<Encoder::Acts> eacts(j_count);
                std::vector<LatentFeatures> latents;
                std::vector<Predictor::Acts> pacts(j_count);
                std::vector<Tensor> g_logits(j_count);
                std::vector<double> seg(j_count, 0.0);

                for (int j = 0; j < j_count; ++j) {
                    latents.push_back(model.encode(crop.volumes[j], j, &eacts[j]));
                    const Tensor logits = model.predict_logits(
                        model.training_fusion(latents[j]), &pacts[j]);
                    g_logits[j] = Tensor(logits.shape());
                    seg[j] = segmentation_loss(logits, crop.labels, &g_logits[j]);
                    seg_sum[j] += seg[j];
                }

                // alignment gradients on latent values / gaussian stats
                std::vector<Tensor> g_align(j_count);
                std::vector<Tensor> g_logvar(j_count);
                for (int j = 0; j < j_count; ++j) g_align[j] = Tensor(latents[j].values.shape());
                double align = 0.0;
                switch (mc.anchor.kind) {
                    case AnchorKind::none:
                        break;
                    case AnchorKind::fixed_modality:
                        for (int j = 0; j < j_count; ++j) {
                            if (j == mc.anchor.base_k) continue;
                            align += loss_align_fixed_grad(
                                latents[j].values, latents[mc.anchor.base_k].values,
                                g_align[j], g_align[mc.anchor.base_k]);
                        }
                        break;
                    case AnchorKind::adaptive: {
                        std::vector<Tensor> values;
                        for (const auto& lat : latents) values.push_back(lat.values);
                        Tensor g_theta(model.theta.shape());
                        align = loss_align_adaptive_grad(values, model.theta,
                                                         mc.anchor.base_k, g_align, g_theta);
                        model.gtheta.axpy(lambda * inv_b, g_theta);
                        break;
                    }
                    case AnchorKind::standard_normal:
                        for (int j = 0; j < j_count; ++j) {
                            g_logvar[j] = Tensor(latents[j].logvar_map.shape());
                            align += loss_align_normal_grad(
                                latents[j].mean_map, latents[j].logvar_map,
                                mc.anchor.variant, g_align[j], g_logvar[j]);
                        }
                        break;
                }
                align_sum += align;
                batch_loss += std::accumulate(seg.begin(), seg.end(), lambda * align);

                for (int j = 0; j < j_count; ++j) {
                    g_logits[j].scale(inv_b);
                    Tensor g_fused = model.predictor.backward(pacts[j], g_logits[j]);
                    Tensor g_values = training_fusion_grad(model, g_fused, j);
                    g_values.axpy(lambda * inv_b, g_align[j]);
                    if (!g_logvar[j].empty()) g_logvar[j].scale(lambda * inv_b);
                    model.encoders[j].backward(eacts[j], g_values,
                                               g_logvar[j].empty() ? nullptr : &g_logvar[j]);
                }
                ++seen;
            }
            check_finite(batch_loss, epoch, batch_no);
            opt.step(model, lr);
        }

        EpochLog entry;
        entry.epoch = epoch;
        entry.lr = lr;
        for (double s : seg_sum) entry.seg_loss.push_back(s / static_cast<double>(seen));
        entry.align_loss = align_sum / static_cast<double>(seen);
        entry.gap = compute_modality_gap(model, eval_set, config);
        if (mc.anchor.kind == AnchorKind::adaptive) {
            entry.weights = adaptive_weights(model.theta);
        }
        result.log.push_back(std::move(entry));
    }
    return result;
}

TrainResult train_student(const TrainConfig& config, SegModel* teacher,
                          const ModalityMask& mask) {
    config.validate();
    ModelConfig mc = config.model;
    mc.modality_count = config.modality_count();
    mc.anchor = AnchorSpec{};  // students do not align; they distill

    if (mask.empty()) throw std::invalid_argument("train_student: empty mask");
    if (mask.modality_count != mc.modality_count ||
        (mask.bits >> mc.modality_count) != 0)
        throw std::invalid_argument("train_student: mask references modality >= J");
    if (teacher && teacher->cfg.modality_count != mc.modality_count)
        throw std::invalid_argument("train_student: teacher modality count mismatch");

    TrainResult result;
    result.model = SegModel::create(mc, mix_seed(config.seed, 0x57de));
    SegModel& model = result.model;
    const int j_count = mc.modality_count;
    const auto& dc = config.distill;
    const ModalityMask full = ModalityMask::full(j_count);

    std::vector<int> present;
    for (int j = 0; j < j_count; ++j) {
        if (mask.present(j)) present.push_back(j);
    }
    const int p_count = static_cast<int>(present.size());

    const auto all = build_dataset(config);
    std::vector<MultiModalSample> train_set, eval_set;
    split_dataset(all, config.holdout, train_set, eval_set);

    const bool use_latent = teacher && dc.latent_weight > 0.0;
    const bool use_soft = teacher && dc.soft_label_weight > 0.0;

    Adam opt;
    for (int epoch = 0; epoch < config.student_epochs; ++epoch) {
        const double lr = config.optim.lr_at(epoch);
        const auto order = epoch_order(train_set.size(), config.seed, epoch);

        double seg_sum = 0.0, distill_sum = 0.0;
        std::size_t seen = 0, batch_no = 0;

        for (std::size_t start = 0; start < order.size();
             start += config.optim.batch_size, ++batch_no) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(config.optim.batch_size));
            const std::size_t b_count = stop - start;
            const double inv_b = 1.0 / static_cast<double>(b_count);
            model.zero_grad();

            // phase 1: forward every sample, cache what backward needs
            std::vector<std::vector<Encoder::Acts>> eacts(b_count);
            std::vector<std::vector<LatentFeatures>> lats(b_count);
            std::vector<Predictor::Acts> pacts(b_count);
            std::vector<Tensor> g_logits(b_count);
            std::vector<std::vector<Tensor>> targets(b_count);  // latent distill targets
            double batch_loss = 0.0;

            for (std::size_t b = 0; b < b_count; ++b) {
                const std::size_t idx = order[start + b];
                const MultiModalSample crop =
                    random_crop(train_set[idx], config.crop_d, config.crop_h,
                                config.crop_w, crop_seed(config.seed, epoch, idx));

                eacts[b].resize(p_count);
                for (int pi = 0; pi < p_count; ++pi) {
                    lats[b].push_back(
                        model.encode(crop.volumes[present[pi]], present[pi], &eacts[b][pi]));
                }
                const Tensor fused = model.fuse_latents(lats[b], mask);
                const Tensor logits = model.predict_logits(fused, &pacts[b]);
                g_logits[b] = Tensor(logits.shape());
                const double seg = segmentation_loss(logits, crop.labels, &g_logits[b]);
                seg_sum += seg;
                double sample_loss = seg;

                if (teacher) {
                    std::vector<LatentFeatures> t_lats;
                    for (int j = 0; j < j_count; ++j) {
                        t_lats.push_back(teacher->encode(crop.volumes[j], j));
                    }
                    if (use_latent) {
                        const Tensor t_fused = teacher->fuse_latents(t_lats, full);
                        for (int pi = 0; pi < p_count; ++pi) {
                            targets[b].push_back(dc.fused_teacher_target
                                                     ? t_fused
                                                     : t_lats[present[pi]].values);
                        }
                    }
                    if (use_soft) {
                        const Tensor t_probs = teacher->predict_segmentation(
                            teacher->fuse_latents(t_lats, full));
                        const Tensor s_probs = softmax_channels(logits);
                        Tensor g_sprobs(s_probs.shape());
                        const double soft = loss_soft_label_grad(
                            s_probs, t_probs, dc.temperature, g_sprobs);
                        Tensor g_soft_logits = softmax_backward(s_probs, g_sprobs);
                        g_logits[b].axpy(dc.soft_label_weight, g_soft_logits);
                        distill_sum += dc.soft_label_weight * soft;
                        sample_loss += dc.soft_label_weight * soft;
                    }
                }
                batch_loss += sample_loss;
                ++seen;
            }

            // phase 2: latent distillation gradients (batch-level for moment KL)
            std::vector<std::vector<Tensor>> g_distill(b_count);
            if (use_latent) {
                if (dc.latent_mode == LatentDistillMode::mse) {
                    const double w = dc.latent_weight / static_cast<double>(p_count);
                    for (std::size_t b = 0; b < b_count; ++b) {
                        for (int pi = 0; pi < p_count; ++pi) {
                            Tensor g(lats[b][pi].values.shape());
                            const double term = loss_latent_distill_mse_grad(
                                lats[b][pi].values, targets[b][pi], g);
                            g.scale(w * inv_b);
                            g_distill[b].push_back(std::move(g));
                            distill_sum += w * term;
                            batch_loss += w * term;
                        }
                    }
                } else {
                    // one Gaussian moment-KL over all latents in the batch
                    std::vector<Tensor> student_batch, teacher_batch;
                    for (std::size_t b = 0; b < b_count; ++b) {
                        for (int pi = 0; pi < p_count; ++pi) {
                            student_batch.push_back(lats[b][pi].values);
                            teacher_batch.push_back(targets[b][pi]);
                        }
                    }
                    std::vector<Tensor> g_batch;
                    for (const auto& t : student_batch) g_batch.emplace_back(t.shape());
                    const double term = loss_latent_distill_moment_kl_grad(
                        student_batch, teacher_batch, g_batch);
                    std::size_t slot = 0;
                    for (std::size_t b = 0; b < b_count; ++b) {
                        for (int pi = 0; pi < p_count; ++pi) {
                            g_batch[slot].scale(dc.latent_weight);
                            g_distill[b].push_back(std::move(g_batch[slot]));
                            ++slot;
                        }
                    }
                    distill_sum += dc.latent_weight * term * static_cast<double>(b_count);
                    batch_loss += dc.latent_weight * term * static_cast<double>(b_count);
                }
            }

            // phase 3: backward
            for (std::size_t b = 0; b < b_count; ++b) {
                g_logits[b].scale(inv_b);
                const Tensor g_fused = model.predictor.backward(pacts[b], g_logits[b]);
                for (int pi = 0; pi < p_count; ++pi) {
                    Tensor g_values = fuse_grad(model, g_fused, present[pi], p_count);
                    if (use_latent) g_values.axpy(1.0, g_distill[b][pi]);
                    model.encoders[present[pi]].backward(eacts[b][pi], g_values, nullptr);
                }
            }
            check_finite(batch_loss, epoch, batch_no);
            opt.step(model, lr);
        }

        EpochLog entry;
        entry.epoch = epoch;
        entry.lr = lr;
        entry.seg_loss.push_back(seg_sum / static_cast<double>(seen));
        entry.distill_loss = distill_sum / static_cast<double>(seen);
        entry.gap = p_count > 1 ? compute_modality_gap(model, eval_set, config) : 0.0;
        result.log.push_back(std::move(entry));
    }
    return result;
}

DiceReport evaluate(SegModel& model, const std::vector<MultiModalSample>& samples,
                    const std::vector<ModalityMask>& masks, const TrainConfig& config) {
    if (samples.empty()) throw std::invalid_argument("evaluate: no samples");
    std::vector<DiceEntry> entries;
    for (const auto& mask : masks) {
        if (mask.empty() || mask.modality_count != model.cfg.modality_count ||
            (mask.bits >> model.cfg.modality_count) != 0)
            throw std::invalid_argument("evaluate: mask incompatible with model");
        double wt = 0.0, tc = 0.0, ec = 0.0;
        for (const auto& sample : samples) {
            const MultiModalSample crop =
                center_crop(sample, config.crop_d, config.crop_h, config.crop_w);
            std::vector<LatentFeatures> lats;
            for (int j = 0; j < model.cfg.modality_count; ++j) {
                if (mask.present(j)) lats.push_back(model.encode(crop.volumes[j], j));
            }
            const Tensor probs =
                model.predict_segmentation(model.fuse_latents(lats, mask));
            const RegionMasks pr = derive_regions(argmax_labels(probs));
            const RegionMasks gr = derive_regions(crop.labels);
            wt += dice_score(pr.wt, gr.wt);
            tc += dice_score(pr.tc, gr.tc);
            ec += dice_score(pr.ec, gr.ec);
        }
        const double n = static_cast<double>(samples.size());
        DiceEntry e;
        e.method = "model";
        e.mask = mask;
        e.anchor = anchor_kind_name(model.cfg.anchor.kind);
        e.wt = wt / n * 100.0;
        e.tc = tc / n * 100.0;
        e.ec = ec / n * 100.0;
        entries.push_back(std::move(e));
    }
    return aggregate_report(entries);
}

namespace {

// Cyclic Jacobi eigendecomposition of a small symmetric matrix.
void jacobi_eigen(std::vector<std::vector<double>>& a, std::vector<double>& eigval,
                  std::vector<std::vector<double>>& eigvec) {
    const int n = static_cast<int>(a.size());
    eigvec.assign(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) eigvec[i][i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        }
        if (off < 1e-24) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = eigvec[k][p], vkq = eigvec[k][q];
                    eigvec[k][p] = c * vkp - s * vkq;
                    eigvec[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    eigval.resize(n);
    for (int i = 0; i < n; ++i) eigval[i] = a[i][i];
}

// Top-2 principal-component coordinates of the row set; zero variance along a
// component maps to zero coordinates. Component signs are fixed so the largest
// loading is positive.
std::vector<std::array<double, 2>> pca2(const std::vector<std::vector<double>>& rows) {
    if (rows.size() < 3) throw std::invalid_argument("pca2: need at least 3 rows");
    const int dim = static_cast<int>(rows.front().size());
    const double n = static_cast<double>(rows.size());

    std::vector<double> mean(dim, 0.0);
    for (const auto& r : rows) {
        for (int i = 0; i < dim; ++i) mean[i] += r[i];
    }
    for (auto& m : mean) m /= n;

    std::vector<std::vector<double>> cov(dim, std::vector<double>(dim, 0.0));
    for (const auto& r : rows) {
        for (int i = 0; i < dim; ++i) {
            for (int j = i; j < dim; ++j) {
                cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    for (int i = 0; i < dim; ++i) {
        for (int j = i; j < dim; ++j) {
            cov[i][j] /= n;
            cov[j][i] = cov[i][j];
        }
    }

    std::vector<double> eigval;
    std::vector<std::vector<double>> eigvec;
    jacobi_eigen(cov, eigval, eigvec);

    std::vector<int> idx(dim);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return eigval[a] > eigval[b]; });

    std::vector<std::array<double, 2>> coords(rows.size(), {0.0, 0.0});
    for (int comp = 0; comp < 2 && comp < dim; ++comp) {
        const int e = idx[comp];
        if (eigval[e] <= 1e-18) continue;
        std::vector<double> v(dim);
        int arg = 0;
        for (int i = 0; i < dim; ++i) {
            v[i] = eigvec[i][e];
            if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
        }
        if (v[arg] < 0.0) {
            for (auto& x : v) x = -x;
        }
        for (std::size_t r = 0; r < rows.size(); ++r) {
            double dot = 0.0;
            for (int i = 0; i < dim; ++i) dot += (rows[r][i] - mean[i]) * v[i];
            coords[r][comp] = dot;
        }
    }
    return coords;
}

}  // namespace

std::string latents_csv(SegModel& model, const std::vector<MultiModalSample>& samples,
                        const TrainConfig& config) {
    const int j_count = model.cfg.modality_count;
    std::vector<std::vector<double>> rows;
    std::vector<std::string> ids;
    std::vector<int> mods;
    for (const auto& sample : samples) {
        const MultiModalSample crop =
            center_crop(sample, config.crop_d, config.crop_h, config.crop_w);
        for (int j = 0; j < j_count; ++j) {
            rows.push_back(channel_means(model.encode(crop.volumes[j], j).values));
            ids.push_back(sample.sample_id);
            mods.push_back(j);
        }
    }
    const auto coords = pca2(rows);

    std::ostringstream out;
    out << "sample,modality";
    for (std::size_t c = 0; c < rows.front().size(); ++c) out << ",c" << c;
    out << ",pc1,pc2\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out << ids[r] << "," << mods[r];
        for (double v : rows[r]) out << "," << fmt(v);
        out << "," << fmt(coords[r][0]) << "," << fmt(coords[r][1]) << "\n";
    }
    return out.str();
}

namespace {

void write_ppm(const std::string& path, int height, int width,
               const std::vector<std::uint8_t>& rgb) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("export_slices: cannot open " + path);
    out << "P6\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(rgb.data()),
              static_cast<std::streamsize>(rgb.size()));
}

// (height, width) of a slice plus a flat-index mapper for the chosen axis.
struct SlicePlane {
    int height, width;
    std::function<std::size_t(int, int)> flat;
};

SlicePlane slice_plane(int d, int h, int w, int axis, int index) {
    const int extent = axis == 0 ? d : axis == 1 ? h : w;
    if (axis < 0 || axis > 2) throw std::invalid_argument("export_slices: bad axis");
    if (index < 0 || index >= extent)
        throw std::invalid_argument("export_slices: index out of range");
    auto at = [h, w](int z, int y, int x) {
        return (static_cast<std::size_t>(z) * h + y) * w + x;
    };
    if (axis == 0) return {h, w, [=](int r, int c) { return at(index, r, c); }};
    if (axis == 1) return {d, w, [=](int r, int c) { return at(r, index, c); }};
    return {d, h, [=](int r, int c) { return at(r, c, index); }};
}

}  // namespace

void export_slices(const MultiModalSample& sample, const LabelVolume* predicted,
                   int axis, int index, const std::string& out_prefix) {
    sample.validate();
    const auto& s = sample.volumes.at(0).shape();
    const SlicePlane plane = slice_plane(s[0], s[1], s[2], axis, index);

    for (int j = 0; j < sample.modality_count(); ++j) {
        std::vector<std::uint8_t> rgb(static_cast<std::size_t>(plane.height) *
                                      plane.width * 3);
        for (int r = 0; r < plane.height; ++r) {
            for (int c = 0; c < plane.width; ++c) {
                double v = sample.volumes[j][plane.flat(r, c)];
                v = std::clamp((v + 1.0) / 2.0, 0.0, 1.0);
                const auto g = static_cast<std::uint8_t>(std::lround(v * 255.0));
                const std::size_t o = (static_cast<std::size_t>(r) * plane.width + c) * 3;
                rgb[o] = rgb[o + 1] = rgb[o + 2] = g;
            }
        }
        write_ppm(out_prefix + "_mod" + std::to_string(j) + ".ppm", plane.height,
                  plane.width, rgb);
    }

    // background black, edema (whole-tumor only) green, core yellow,
    // enhancing core red
    auto write_labels = [&](const LabelVolume& labels, const std::string& suffix) {
        static const std::uint8_t palette[4][3] = {
            {0, 0, 0}, {0, 255, 0}, {255, 255, 0}, {255, 0, 0}};
        std::vector<std::uint8_t> rgb(static_cast<std::size_t>(plane.height) *
                                      plane.width * 3);
        for (int r = 0; r < plane.height; ++r) {
            for (int c = 0; c < plane.width; ++c) {
                const std::uint8_t cls = labels.v[plane.flat(r, c)];
                if (cls > 3) throw std::invalid_argument("export_slices: label > 3");
                const std::size_t o = (static_cast<std::size_t>(r) * plane.width + c) * 3;
                rgb[o] = palette[cls][0];
                rgb[o + 1] = palette[cls][1];
                rgb[o + 2] = palette[cls][2];
            }
        }
        write_ppm(out_prefix + "_" + suffix + ".ppm", plane.height, plane.width, rgb);
    };
    write_labels(sample.labels, "gt");
    if (predicted) {
        if (predicted->d != s[0] || predicted->h != s[1] || predicted->w != s[2])
            throw std::invalid_argument("export_slices: prediction shape mismatch");
        write_labels(*predicted, "pred");
    }
}

std::string SweepResult::to_csv() const {
    std::ostringstream out;
    const std::size_t j_count = dice.size();
    out << "trained_on";
    for (std::size_t m = 0; m < j_count; ++m) out << ",target_" << m;
    out << ",average\n";
    for (std::size_t k = 0; k < j_count; ++k) {
        out << k;
        for (double v : dice[k]) out << "," << fmt(v);
        out << "," << fmt(row_avg[k]) << "\n";
    }
    out << "best_k," << best_k << "\n";
    return out.str();
}

SweepResult sweep_anchor(const TrainConfig& config) {
    config.validate();
    const int j_count = config.modality_count();
    const auto all = build_dataset(config);
    std::vector<MultiModalSample> train_set, eval_set;
    split_dataset(all, config.holdout, train_set, eval_set);

    SweepResult result;
    result.dice.assign(j_count, std::vector<double>(j_count, 0.0));
    result.row_avg.assign(j_count, 0.0);

    for (int k = 0; k < j_count; ++k) {
        TrainConfig ck = config;
        ck.student_epochs = config.epochs;  // the sweep trains plain teachers
        TrainResult trained =
            train_student(ck, nullptr, ModalityMask::single(k, j_count));
        SegModel& model = trained.model;

        // cross-modality scoring: push each target modality through the
        // trained pathway
        for (int m = 0; m < j_count; ++m) {
            double acc = 0.0;
            for (const auto& sample : eval_set) {
                const MultiModalSample crop =
                    center_crop(sample, config.crop_d, config.crop_h, config.crop_w);
                const LatentFeatures lat =
                    model.encoders[k].forward(crop.volumes[m], k, false);
                const Tensor probs =
                    model.predict_segmentation(model.training_fusion(lat));
                acc += region_avg_dice(probs, crop.labels);
            }
            result.dice[k][m] = acc / static_cast<double>(eval_set.size());
            result.row_avg[k] += result.dice[k][m];
        }
        result.row_avg[k] /= static_cast<double>(j_count);
        if (result.row_avg[k] > result.row_avg[result.best_k]) result.best_k = k;
    }
    return result;
}

}  // namespace mmseg
