#pragma once

#include <cstdint>

#include "mmseg/data/sample.hpp"

namespace mmseg {

struct PhantomConfig {
    int d = 32, h = 32, w = 32;
    int modality_count = 4;
    int informative_modality = 2;  // mimics T1ce in Flair/T1/T1ce/T2 order
    double noise_std = 0.05;
    double tumor_radius_min = 5.0;
    double tumor_radius_max = 9.0;
    std::uint64_t seed = 0;

    void validate() const;
};

// Deterministic synthetic phantom: smooth tissue map with concentric tumor
// ellipsoids (class 3 inside 2 inside 1), one distinct monotone transform per
// modality, Gaussian noise on top. The informative modality gets the transform
// with the steepest response at the enhancing-core intensity.
MultiModalSample generate_phantom(const PhantomConfig& config);

// The per-modality transform is v = t^gamma on the shared tissue map t in
// (0,1]. Exposed so tests can recompute modalities from one another.
double modality_gamma(const PhantomConfig& config, int modality);
double apply_modality_transform(double tissue, double gamma);

// Affine map of [min,max] onto [-1,1]; constant volumes map to all zeros.
// Throws on NaN/Inf input.
Tensor normalize_intensity(const Tensor& volume);

// Same random offset applied to all volumes and labels; offset uniform over
// valid positions, deterministic by seed.
MultiModalSample random_crop(const MultiModalSample& sample, int cd, int ch, int cw,
                             std::uint64_t seed);

}  // namespace mmseg
