#pragma once

#include <vector>

#include "mmseg/align/anchor_spec.hpp"
#include "mmseg/nets/model.hpp"

namespace mmseg {

// Simplex-scaled adaptive weights: w = J * softmax(theta), so w_j > 0 and
// sum_j w_j = J. Uniform theta gives w_j = 1 for all j.
std::vector<double> adaptive_weights(const Tensor& theta);

// Mean squared error between paired latents of two modalities.
double loss_align_fixed(const Tensor& z_j, const Tensor& z_k);
// Accumulates d(loss)/dz into g_j and g_k.
double loss_align_fixed_grad(const Tensor& z_j, const Tensor& z_k, Tensor& g_j,
                             Tensor& g_k);

// sum_j w_j * mse(z_j, z_base) with learnable theta; the base term is zero.
double loss_align_adaptive(const std::vector<Tensor>& latents, const Tensor& theta,
                           int base_k);
double loss_align_adaptive_grad(const std::vector<Tensor>& latents, const Tensor& theta,
                                int base_k, std::vector<Tensor>& g_latents,
                                Tensor& g_theta);

// KL of the encoder's per-element Gaussian stats against N(0,1), averaged over
// elements. closed_form is the standard Gaussian KL; paper_literal carries a
// doubled log term. Both vanish at (mu=0, sigma=1).
double loss_align_normal(const Tensor& mean, const Tensor& logvar, NormalVariant variant);
double loss_align_normal_grad(const Tensor& mean, const Tensor& logvar,
                              NormalVariant variant, Tensor& g_mean, Tensor& g_logvar);

// Alignment term of the teacher objective for the given anchor; latents must
// carry gaussian stats for the standard-normal anchor.
double alignment_term(const std::vector<LatentFeatures>& latents, const AnchorSpec& anchor,
                      const Tensor& theta);

// sum_j seg_loss_j + lambda * alignment term. Anchor `none` reduces to the
// plain summed segmentation objective.
double teacher_loss(const std::vector<LatentFeatures>& latents, const AnchorSpec& anchor,
                    const Tensor& theta, const std::vector<double>& seg_losses,
                    double lambda_align);

// Mean pairwise Euclidean distance between per-modality centroids of latent
// summary vectors.
double modality_gap(const std::vector<std::vector<std::vector<double>>>& latent_sets);

}  // namespace mmseg
