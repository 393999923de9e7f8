#include "mmseg/data/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mmseg/core/rng.hpp"

namespace mmseg {

namespace {

// Tissue intensity plateaus. Enhancing core sits near 1 so a convex transform
// (gamma > 1) yields the strongest core/background contrast.
constexpr double kBackgroundBase = 0.30;
constexpr double kEdemaValue = 0.60;
constexpr double kCoreValue = 0.78;
constexpr double kEnhancingValue = 0.95;

}  // namespace

void PhantomConfig::validate() const {
    if (d < 1 || h < 1 || w < 1) throw std::invalid_argument("phantom: empty shape");
    if (modality_count < 1) throw std::invalid_argument("phantom: J must be >= 1");
    if (informative_modality < 0 || informative_modality >= modality_count)
        throw std::invalid_argument("phantom: informative_modality out of range");
    if (noise_std < 0.0) throw std::invalid_argument("phantom: negative noise_std");
    if (tumor_radius_min > tumor_radius_max)
        throw std::invalid_argument("phantom: radius min > max");
    const int min_dim = std::min({d, h, w});
    if (2.0 * tumor_radius_min + 2.0 > min_dim)
        throw std::invalid_argument("phantom: shape too small for min tumor radius");
}

double modality_gamma(const PhantomConfig& config, int modality) {
    if (modality < 0 || modality >= config.modality_count)
        throw std::invalid_argument("modality_gamma: modality out of range");
    if (modality == config.informative_modality) return 2.5;
    // distinct concave exponents for the remaining modalities
    static const double kGammas[] = {0.45, 0.65, 0.85, 1.10, 1.30, 0.55, 0.75, 0.95};
    int slot = modality < config.informative_modality ? modality : modality - 1;
    return kGammas[slot % 8];
}

double apply_modality_transform(double tissue, double gamma) {
    return std::pow(tissue, gamma);
}

MultiModalSample generate_phantom(const PhantomConfig& config) {
    config.validate();
    Rng rng(mix_seed(config.seed, 0x7a11));

    const int d = config.d, h = config.h, w = config.w;

    // Tumor geometry: concentric ellipsoids, center kept away from borders.
    const double r1 = rng.uniform(config.tumor_radius_min, config.tumor_radius_max);
    const double r2 = 0.66 * r1;
    const double r3 = 0.35 * r1;
    const double margin = r1 + 1.0;
    auto center_coord = [&](int extent) {
        const double lo = std::min(margin, extent / 2.0);
        const double hi = std::max(extent - margin, extent / 2.0);
        return rng.uniform(lo, hi);
    };
    const double cz = center_coord(d), cy = center_coord(h), cx = center_coord(w);
    const double az = rng.uniform(0.85, 1.15);
    const double ay = rng.uniform(0.85, 1.15);
    const double ax = rng.uniform(0.85, 1.15);

    // Smooth background field parameters.
    const double pz = rng.uniform(0.0, 6.28), py = rng.uniform(0.0, 6.28),
                 px = rng.uniform(0.0, 6.28);
    const double fz = rng.uniform(1.0, 2.0), fy = rng.uniform(1.0, 2.0),
                 fx = rng.uniform(1.0, 2.0);

    MultiModalSample sample;
    sample.labels = LabelVolume(d, h, w);
    Tensor tissue({d, h, w});

    std::size_t idx = 0;
    for (int z = 0; z < d; ++z) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x, ++idx) {
                const double rz = (z - cz) / az, ry = (y - cy) / ay, rx = (x - cx) / ax;
                const double rho = std::sqrt(rz * rz + ry * ry + rx * rx);
                std::uint8_t label = 0;
                double t;
                if (rho <= r3) {
                    label = 3;
                    t = kEnhancingValue;
                } else if (rho <= r2) {
                    label = 2;
                    t = kCoreValue;
                } else if (rho <= r1) {
                    label = 1;
                    t = kEdemaValue;
                } else {
                    t = kBackgroundBase +
                        0.08 * std::sin(fz * 6.2831853 * z / d + pz) *
                            std::cos(fy * 6.2831853 * y / h + py) +
                        0.05 * std::sin(fx * 6.2831853 * x / w + px);
                }
                sample.labels.v[idx] = label;
                tissue[idx] = std::clamp(t, 0.05, 1.0);
            }
        }
    }

    sample.volumes.reserve(config.modality_count);
    for (int j = 0; j < config.modality_count; ++j) {
        const double gamma = modality_gamma(config, j);
        Tensor vol({d, h, w});
        Rng noise(mix_seed(config.seed, 0x4e00 + static_cast<std::uint64_t>(j)));
        for (std::size_t i = 0; i < vol.numel(); ++i) {
            double v = apply_modality_transform(tissue[i], gamma);
            if (config.noise_std > 0.0) v += noise.normal(0.0, config.noise_std);
            vol[i] = v;
        }
        sample.volumes.push_back(std::move(vol));
    }
    sample.sample_id = "phantom-" + std::to_string(config.seed);
    return sample;
}

Tensor normalize_intensity(const Tensor& volume) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < volume.numel(); ++i) {
        const double v = volume[i];
        if (!std::isfinite(v))
            throw std::invalid_argument("normalize_intensity: non-finite voxel");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    Tensor out(volume.shape());
    if (volume.numel() == 0) return out;
    if (hi == lo) return out;  // constant volume -> zeros
    const double scale = 2.0 / (hi - lo);
    for (std::size_t i = 0; i < volume.numel(); ++i) {
        out[i] = (volume[i] - lo) * scale - 1.0;
    }
    return out;
}

MultiModalSample random_crop(const MultiModalSample& sample, int cd, int ch, int cw,
                             std::uint64_t seed) {
    const auto& shape = sample.volumes.at(0).shape();
    const int d = shape[0], h = shape[1], w = shape[2];
    if (cd < 1 || ch < 1 || cw < 1 || cd > d || ch > h || cw > w)
        throw std::invalid_argument("random_crop: crop exceeds volume shape");

    Rng rng(mix_seed(seed, 0xc409));
    const int oz = static_cast<int>(rng.uniform_index(d - cd + 1));
    const int oy = static_cast<int>(rng.uniform_index(h - ch + 1));
    const int ox = static_cast<int>(rng.uniform_index(w - cw + 1));

    MultiModalSample out;
    out.sample_id = sample.sample_id;
    out.labels = LabelVolume(cd, ch, cw);
    for (const auto& vol : sample.volumes) {
        Tensor cropped({cd, ch, cw});
        std::size_t dst = 0;
        for (int z = 0; z < cd; ++z) {
            for (int y = 0; y < ch; ++y) {
                const std::size_t src =
                    (static_cast<std::size_t>(z + oz) * h + (y + oy)) * w + ox;
                std::copy_n(vol.data() + src, cw, cropped.data() + dst);
                dst += cw;
            }
        }
        out.volumes.push_back(std::move(cropped));
    }
    std::size_t dst = 0;
    for (int z = 0; z < cd; ++z) {
        for (int y = 0; y < ch; ++y) {
            const std::size_t src =
                (static_cast<std::size_t>(z + oz) * h + (y + oy)) * w + ox;
            std::copy_n(sample.labels.v.data() + src, cw, out.labels.v.data() + dst);
            dst += cw;
        }
    }
    return out;
}

}  // namespace mmseg
