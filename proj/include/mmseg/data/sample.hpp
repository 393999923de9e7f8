#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmseg/core/tensor.hpp"

namespace mmseg {

// Class-label volume. 0=background, 1=edema, 2=non-enhancing core,
// 3=enhancing core.
struct LabelVolume {
    int d = 0, h = 0, w = 0;
    std::vector<std::uint8_t> v;

    LabelVolume() = default;
    LabelVolume(int d_, int h_, int w_)
        : d(d_), h(h_), w(w_), v(static_cast<std::size_t>(d_) * h_ * w_, 0) {}

    std::size_t size() const { return v.size(); }
    std::uint8_t& at(int z, int y, int x) {
        return v[(static_cast<std::size_t>(z) * h + y) * w + x];
    }
    std::uint8_t at(int z, int y, int x) const {
        return v[(static_cast<std::size_t>(z) * h + y) * w + x];
    }
};

// J co-registered intensity volumes plus one label volume.
struct MultiModalSample {
    std::vector<Tensor> volumes;  // each shape (D,H,W)
    LabelVolume labels;
    std::string sample_id;

    int modality_count() const { return static_cast<int>(volumes.size()); }
    void validate() const;
};

// Subset of {0..J-1} marking present modalities.
struct ModalityMask {
    std::uint32_t bits = 0;
    int modality_count = 0;

    bool present(int j) const { return (bits >> j) & 1u; }
    int count() const { return __builtin_popcount(bits); }
    bool empty() const { return bits == 0; }

    // "oxox"-style string, 'o' = present, 'x' = missing, index order
    // Flair/T1/T1ce/T2 when J=4.
    std::string to_string() const;
    static ModalityMask full(int j_count) {
        return {j_count >= 32 ? ~0u : ((1u << j_count) - 1u), j_count};
    }
    static ModalityMask single(int j, int j_count) { return {1u << j, j_count}; }
    bool operator==(const ModalityMask& o) const {
        return bits == o.bits && modality_count == o.modality_count;
    }
};

// All non-empty subsets, ordered by popcount then lexicographically on the
// sorted index tuple.
std::vector<ModalityMask> enumerate_modality_masks(int j_count);

}  // namespace mmseg
