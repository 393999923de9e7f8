#include "mmseg/align/align.hpp"

#include <cmath>
#include <stdexcept>

namespace mmseg {

std::vector<double> adaptive_weights(const Tensor& theta) {
    const std::size_t j_count = theta.numel();
    if (j_count == 0) throw std::invalid_argument("adaptive_weights: empty theta");
    double mx = theta[0];
    for (std::size_t j = 1; j < j_count; ++j) mx = std::max(mx, theta[j]);
    std::vector<double> w(j_count);
    double denom = 0.0;
    for (std::size_t j = 0; j < j_count; ++j) {
        w[j] = std::exp(theta[j] - mx);
        denom += w[j];
    }
    for (auto& v : w) v *= static_cast<double>(j_count) / denom;
    return w;
}

double loss_align_fixed(const Tensor& z_j, const Tensor& z_k) {
    z_j.require_same_shape(z_k, "loss_align_fixed");
    return z_j.mse(z_k);
}

double loss_align_fixed_grad(const Tensor& z_j, const Tensor& z_k, Tensor& g_j,
                             Tensor& g_k) {
    z_j.require_same_shape(z_k, "loss_align_fixed");
    const double inv_n = 1.0 / static_cast<double>(z_j.numel());
    double acc = 0.0;
    for (std::size_t i = 0; i < z_j.numel(); ++i) {
        const double d = z_j[i] - z_k[i];
        acc += d * d;
        g_j[i] += 2.0 * d * inv_n;
        g_k[i] -= 2.0 * d * inv_n;
    }
    return acc * inv_n;
}

double loss_align_adaptive(const std::vector<Tensor>& latents, const Tensor& theta,
                           int base_k) {
    const int j_count = static_cast<int>(latents.size());
    if (j_count < 2) throw std::invalid_argument("loss_align_adaptive: needs >= 2 modalities");
    if (base_k < 0 || base_k >= j_count)
        throw std::invalid_argument("loss_align_adaptive: base_k out of range");
    if (static_cast<int>(theta.numel()) != j_count)
        throw std::invalid_argument("loss_align_adaptive: theta size mismatch");
    const auto w = adaptive_weights(theta);
    double loss = 0.0;
    for (int j = 0; j < j_count; ++j) {
        if (j == base_k) continue;
        loss += w[j] * latents[j].mse(latents[base_k]);
    }
    return loss;
}

double loss_align_adaptive_grad(const std::vector<Tensor>& latents, const Tensor& theta,
                                int base_k, std::vector<Tensor>& g_latents,
                                Tensor& g_theta) {
    const int j_count = static_cast<int>(latents.size());
    if (j_count < 2) throw std::invalid_argument("loss_align_adaptive: needs >= 2 modalities");
    if (base_k < 0 || base_k >= j_count)
        throw std::invalid_argument("loss_align_adaptive: base_k out of range");
    const auto w = adaptive_weights(theta);
    std::vector<double> mse(j_count, 0.0);
    double loss = 0.0;
    for (int j = 0; j < j_count; ++j) {
        if (j == base_k) continue;
        const Tensor& zj = latents[j];
        const Tensor& zk = latents[base_k];
        zj.require_same_shape(zk, "loss_align_adaptive");
        const double inv_n = 1.0 / static_cast<double>(zj.numel());
        double acc = 0.0;
        for (std::size_t i = 0; i < zj.numel(); ++i) {
            const double d = zj[i] - zk[i];
            acc += d * d;
            g_latents[j][i] += w[j] * 2.0 * d * inv_n;
            g_latents[base_k][i] -= w[j] * 2.0 * d * inv_n;
        }
        mse[j] = acc * inv_n;
        loss += w[j] * mse[j];
    }
    // w_j = J * s_j, dw_j/dtheta_t = J * s_j * (delta_jt - s_t), s_j = w_j / J
    for (int t = 0; t < j_count; ++t) {
        double g = 0.0;
        for (int j = 0; j < j_count; ++j) {
            if (j == base_k) continue;
            const double s_j = w[j] / j_count;
            const double s_t = w[t] / j_count;
            const double delta = (j == t) ? 1.0 : 0.0;
            g += mse[j] * static_cast<double>(j_count) * s_j * (delta - s_t);
        }
        g_theta[t] += g;
    }
    return loss;
}

double loss_align_normal(const Tensor& mean, const Tensor& logvar, NormalVariant variant) {
    mean.require_same_shape(logvar, "loss_align_normal");
    if (mean.numel() == 0) throw std::invalid_argument("loss_align_normal: empty stats");
    double acc = 0.0;
    for (std::size_t i = 0; i < mean.numel(); ++i) {
        const double mu = mean[i], lv = logvar[i];
        if (variant == NormalVariant::closed_form) {
            acc += -0.5 * (1.0 + lv - mu * mu - std::exp(lv));
        } else {
            // -log sigma^2 + (sigma^2 + mu^2)/2 - 1/2
            acc += -lv + 0.5 * (std::exp(lv) + mu * mu) - 0.5;
        }
    }
    return acc / static_cast<double>(mean.numel());
}

double loss_align_normal_grad(const Tensor& mean, const Tensor& logvar,
                              NormalVariant variant, Tensor& g_mean, Tensor& g_logvar) {
    mean.require_same_shape(logvar, "loss_align_normal");
    const double inv_n = 1.0 / static_cast<double>(mean.numel());
    double acc = 0.0;
    for (std::size_t i = 0; i < mean.numel(); ++i) {
        const double mu = mean[i], lv = logvar[i], ev = std::exp(lv);
        if (variant == NormalVariant::closed_form) {
            acc += -0.5 * (1.0 + lv - mu * mu - ev);
            g_mean[i] += mu * inv_n;
            g_logvar[i] += 0.5 * (ev - 1.0) * inv_n;
        } else {
            acc += -lv + 0.5 * (ev + mu * mu) - 0.5;
            g_mean[i] += mu * inv_n;
            g_logvar[i] += (0.5 * ev - 1.0) * inv_n;
        }
    }
    return acc * inv_n;
}

double alignment_term(const std::vector<LatentFeatures>& latents, const AnchorSpec& anchor,
                      const Tensor& theta) {
    switch (anchor.kind) {
        case AnchorKind::none:
            return 0.0;
        case AnchorKind::fixed_modality: {
            double term = 0.0;
            const Tensor& base = latents.at(anchor.base_k).values;
            for (const auto& lat : latents) {
                if (lat.modality == anchor.base_k) continue;
                term += loss_align_fixed(lat.values, base);
            }
            return term;
        }
        case AnchorKind::adaptive: {
            std::vector<Tensor> values;
            values.reserve(latents.size());
            for (const auto& lat : latents) values.push_back(lat.values);
            return loss_align_adaptive(values, theta, anchor.base_k);
        }
        case AnchorKind::standard_normal: {
            double term = 0.0;
            for (const auto& lat : latents) {
                if (!lat.has_stats)
                    throw std::invalid_argument(
                        "alignment_term: standard-normal anchor requires gaussian stats");
                term += loss_align_normal(lat.mean_map, lat.logvar_map, anchor.variant);
            }
            return term;
        }
    }
    throw std::invalid_argument("alignment_term: bad anchor kind");
}

double teacher_loss(const std::vector<LatentFeatures>& latents, const AnchorSpec& anchor,
                    const Tensor& theta, const std::vector<double>& seg_losses,
                    double lambda_align) {
    if (seg_losses.size() != latents.size())
        throw std::invalid_argument("teacher_loss: one segmentation loss per modality");
    double loss = 0.0;
    for (double s : seg_losses) loss += s;
    return loss + lambda_align * alignment_term(latents, anchor, theta);
}

double modality_gap(const std::vector<std::vector<std::vector<double>>>& latent_sets) {
    if (latent_sets.size() < 2)
        throw std::invalid_argument("modality_gap: needs >= 2 modalities");
    std::vector<std::vector<double>> centroids;
    for (const auto& vectors : latent_sets) {
        if (vectors.empty()) throw std::invalid_argument("modality_gap: empty collection");
        std::vector<double> c(vectors.front().size(), 0.0);
        for (const auto& v : vectors) {
            if (v.size() != c.size())
                throw std::invalid_argument("modality_gap: vector length mismatch");
            for (std::size_t i = 0; i < c.size(); ++i) c[i] += v[i];
        }
        for (auto& x : c) x /= static_cast<double>(vectors.size());
        centroids.push_back(std::move(c));
    }
    double total = 0.0;
    int pairs = 0;
    for (std::size_t a = 0; a < centroids.size(); ++a) {
        for (std::size_t b = a + 1; b < centroids.size(); ++b) {
            double sq = 0.0;
            for (std::size_t i = 0; i < centroids[a].size(); ++i) {
                const double d = centroids[a][i] - centroids[b][i];
                sq += d * d;
            }
            total += std::sqrt(sq);
            ++pairs;
        }
    }
    return total / pairs;
}

}  // namespace mmseg
