#include "mmseg/distill/distill.hpp"

#include <cmath>
#include <stdexcept>

namespace mmseg {

namespace {
constexpr double kProbEps = 1e-8;

struct ChannelStats {
    std::vector<double> mean, var;
    std::size_t per_channel = 0;  // batch * spatial elements per channel
};

ChannelStats channel_stats(const std::vector<Tensor>& batch) {
    const int channels = batch.front().shape()[0];
    const std::size_t spatial = batch.front().numel() / channels;
    ChannelStats st;
    st.mean.assign(channels, 0.0);
    st.var.assign(channels, 0.0);
    st.per_channel = batch.size() * spatial;
    for (const auto& z : batch) {
        batch.front().require_same_shape(z, "channel_stats");
        for (int c = 0; c < channels; ++c) {
            const double* p = z.data() + static_cast<std::size_t>(c) * spatial;
            for (std::size_t i = 0; i < spatial; ++i) st.mean[c] += p[i];
        }
    }
    for (int c = 0; c < channels; ++c) st.mean[c] /= static_cast<double>(st.per_channel);
    for (const auto& z : batch) {
        for (int c = 0; c < channels; ++c) {
            const double* p = z.data() + static_cast<std::size_t>(c) * spatial;
            for (std::size_t i = 0; i < spatial; ++i) {
                const double d = p[i] - st.mean[c];
                st.var[c] += d * d;
            }
        }
    }
    for (int c = 0; c < channels; ++c) {
        st.var[c] = st.var[c] / static_cast<double>(st.per_channel) + 1e-12;
    }
    return st;
}

void validate_probs(const Tensor& probs, const char* what) {
    const int channels = probs.shape().at(0);
    const std::size_t voxels = probs.numel() / channels;
    for (std::size_t v = 0; v < voxels; ++v) {
        double total = 0.0;
        for (int c = 0; c < channels; ++c) {
            const double p = probs[c * voxels + v];
            if (p < -1e-12 || p > 1.0 + 1e-12)
                throw std::invalid_argument(std::string(what) + ": probability outside [0,1]");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-4)
            throw std::invalid_argument(std::string(what) + ": distribution not normalized");
    }
}

}  // namespace

void DistillConfig::validate() const {
    if (temperature <= 0.0) throw std::invalid_argument("DistillConfig: temperature <= 0");
    if (!(latent_weight >= 0.0) || !(soft_label_weight >= 0.0) ||
        !std::isfinite(latent_weight) || !std::isfinite(soft_label_weight))
        throw std::invalid_argument("DistillConfig: weights must be finite and >= 0");
}

double loss_latent_distill_mse(const Tensor& z_student, const Tensor& z_teacher) {
    z_student.require_same_shape(z_teacher, "loss_latent_distill");
    return z_student.mse(z_teacher);
}

double loss_latent_distill_mse_grad(const Tensor& z_student, const Tensor& z_teacher,
                                    Tensor& g_student) {
    z_student.require_same_shape(z_teacher, "loss_latent_distill");
    const double inv_n = 1.0 / static_cast<double>(z_student.numel());
    double acc = 0.0;
    for (std::size_t i = 0; i < z_student.numel(); ++i) {
        const double d = z_student[i] - z_teacher[i];
        acc += d * d;
        g_student[i] += 2.0 * d * inv_n;
    }
    return acc * inv_n;
}

double loss_latent_distill_moment_kl(const std::vector<Tensor>& student_batch,
                                     const std::vector<Tensor>& teacher_batch) {
    if (student_batch.size() < 2 || teacher_batch.size() < 2)
        throw std::invalid_argument("loss_latent_distill: moment KL needs batch >= 2");
    const auto ss = channel_stats(student_batch);
    const auto ts = channel_stats(teacher_batch);
    if (ss.mean.size() != ts.mean.size())
        throw std::invalid_argument("loss_latent_distill: channel count mismatch");
    double loss = 0.0;
    for (std::size_t c = 0; c < ss.mean.size(); ++c) {
        const double dm = ss.mean[c] - ts.mean[c];
        loss += 0.5 * std::log(ts.var[c] / ss.var[c]) +
                (ss.var[c] + dm * dm) / (2.0 * ts.var[c]) - 0.5;
    }
    return loss / static_cast<double>(ss.mean.size());
}

double loss_latent_distill_moment_kl_grad(const std::vector<Tensor>& student_batch,
                                          const std::vector<Tensor>& teacher_batch,
                                          std::vector<Tensor>& g_student) {
    if (student_batch.size() < 2 || teacher_batch.size() < 2)
        throw std::invalid_argument("loss_latent_distill: moment KL needs batch >= 2");
    const auto ss = channel_stats(student_batch);
    const auto ts = channel_stats(teacher_batch);
    const int channels = static_cast<int>(ss.mean.size());
    const std::size_t spatial = student_batch.front().numel() / channels;
    const double inv_c = 1.0 / channels;
    const double inv_n = 1.0 / static_cast<double>(ss.per_channel);

    double loss = 0.0;
    std::vector<double> dmean(channels), dvar(channels);
    for (int c = 0; c < channels; ++c) {
        const double dm = ss.mean[c] - ts.mean[c];
        loss += 0.5 * std::log(ts.var[c] / ss.var[c]) +
                (ss.var[c] + dm * dm) / (2.0 * ts.var[c]) - 0.5;
        dmean[c] = inv_c * dm / ts.var[c];
        dvar[c] = inv_c * (-0.5 / ss.var[c] + 0.5 / ts.var[c]);
    }
    for (std::size_t b = 0; b < student_batch.size(); ++b) {
        const Tensor& z = student_batch[b];
        Tensor& g = g_student[b];
        for (int c = 0; c < channels; ++c) {
            const double* p = z.data() + static_cast<std::size_t>(c) * spatial;
            double* gp = g.data() + static_cast<std::size_t>(c) * spatial;
            for (std::size_t i = 0; i < spatial; ++i) {
                gp[i] += dmean[c] * inv_n + dvar[c] * 2.0 * (p[i] - ss.mean[c]) * inv_n;
            }
        }
    }
    return loss * inv_c;
}

double loss_soft_label(const Tensor& student_probs, const Tensor& teacher_probs,
                       double temperature) {
    Tensor dummy(student_probs.shape());
    return loss_soft_label_grad(student_probs, teacher_probs, temperature, dummy);
}

double loss_soft_label_grad(const Tensor& student_probs, const Tensor& teacher_probs,
                            double temperature, Tensor& g_student_probs) {
    student_probs.require_same_shape(teacher_probs, "loss_soft_label");
    if (temperature <= 0.0) throw std::invalid_argument("loss_soft_label: temperature <= 0");
    validate_probs(student_probs, "loss_soft_label(student)");
    validate_probs(teacher_probs, "loss_soft_label(teacher)");

    const int channels = student_probs.shape()[0];
    const std::size_t voxels = student_probs.numel() / channels;
    const double inv_t = 1.0 / temperature;
    const double t_sq = temperature * temperature;

    double loss = 0.0;
    std::vector<double> soft_s(channels), soft_t(channels);
    for (std::size_t v = 0; v < voxels; ++v) {
        double zs = 0.0, zt = 0.0;
        for (int c = 0; c < channels; ++c) {
            const double ps = std::max(student_probs[c * voxels + v], kProbEps);
            const double pt = std::max(teacher_probs[c * voxels + v], kProbEps);
            soft_s[c] = std::pow(ps, inv_t);
            soft_t[c] = std::pow(pt, inv_t);
            zs += soft_s[c];
            zt += soft_t[c];
        }
        for (int c = 0; c < channels; ++c) {
            soft_s[c] /= zs;
            soft_t[c] /= zt;
            loss += t_sq * soft_t[c] * (std::log(soft_t[c]) - std::log(soft_s[c]));
        }
        for (int c = 0; c < channels; ++c) {
            const double ps = std::max(student_probs[c * voxels + v], kProbEps);
            // d/dp_raw of -T^2 * sum_c t_c ln s_c, with s = softened student
            g_student_probs[c * voxels + v] +=
                -temperature * (soft_t[c] - soft_s[c]) / ps / static_cast<double>(voxels);
        }
    }
    return loss / static_cast<double>(voxels);
}

double student_loss(double seg_loss, double latent_term, double soft_term,
                    const DistillConfig& config) {
    config.validate();
    return seg_loss + config.latent_weight * latent_term +
           config.soft_label_weight * soft_term;
}

}  // namespace mmseg
