#pragma once

#include <vector>

#include "mmseg/core/tensor.hpp"

namespace mmseg {

enum class LatentDistillMode { mse = 0, gaussian_moment_kl = 1 };

struct DistillConfig {
    double latent_weight = 1.0;
    double soft_label_weight = 1.0;
    double temperature = 1.0;
    LatentDistillMode latent_mode = LatentDistillMode::mse;
    // distill from the teacher's fused latent instead of the matching
    // per-modality latent
    bool fused_teacher_target = false;

    void validate() const;
};

// MSE proxy for the latent KL term; teacher latent is a constant target.
double loss_latent_distill_mse(const Tensor& z_student, const Tensor& z_teacher);
double loss_latent_distill_mse_grad(const Tensor& z_student, const Tensor& z_teacher,
                                    Tensor& g_student);

// KL between diagonal Gaussians fitted per channel to the batch statistics of
// student and teacher latents. Requires batch size >= 2.
double loss_latent_distill_moment_kl(const std::vector<Tensor>& student_batch,
                                     const std::vector<Tensor>& teacher_batch);
double loss_latent_distill_moment_kl_grad(const std::vector<Tensor>& student_batch,
                                          const std::vector<Tensor>& teacher_batch,
                                          std::vector<Tensor>& g_student);

// Temperature-softened KL(teacher || student) per voxel, scaled by T^2.
// Inputs are per-voxel class distributions (channel axis first).
double loss_soft_label(const Tensor& student_probs, const Tensor& teacher_probs,
                       double temperature);
double loss_soft_label_grad(const Tensor& student_probs, const Tensor& teacher_probs,
                            double temperature, Tensor& g_student_probs);

// seg + latent_weight * latent_term + soft_label_weight * soft_term.
double student_loss(double seg_loss, double latent_term, double soft_term,
                    const DistillConfig& config);

}  // namespace mmseg
