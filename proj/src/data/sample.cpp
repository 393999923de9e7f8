#include "mmseg/data/sample.hpp"

#include <algorithm>
#include <stdexcept>

namespace mmseg {

void MultiModalSample::validate() const {
    if (volumes.empty()) throw std::invalid_argument("sample: no modalities");
    const auto& shape = volumes.front().shape();
    if (shape.size() != 3) throw std::invalid_argument("sample: volumes must be 3D");
    for (const auto& vol : volumes) {
        if (vol.shape() != shape)
            throw std::invalid_argument("sample: modality shape mismatch");
    }
    if (labels.d != shape[0] || labels.h != shape[1] || labels.w != shape[2])
        throw std::invalid_argument("sample: label shape mismatch");
    for (std::uint8_t c : labels.v) {
        if (c > 3) throw std::invalid_argument("sample: label out of {0,1,2,3}");
    }
}

std::string ModalityMask::to_string() const {
    std::string s(static_cast<std::size_t>(modality_count), 'x');
    for (int j = 0; j < modality_count; ++j) {
        if (present(j)) s[j] = 'o';
    }
    return s;
}

std::vector<ModalityMask> enumerate_modality_masks(int j_count) {
    if (j_count < 1) throw std::invalid_argument("enumerate_modality_masks: J must be >= 1");
    if (j_count > 20) throw std::invalid_argument("enumerate_modality_masks: J too large");
    std::vector<ModalityMask> masks;
    masks.reserve((1u << j_count) - 1u);
    for (std::uint32_t bits = 1; bits < (1u << j_count); ++bits) {
        masks.push_back({bits, j_count});
    }
    std::sort(masks.begin(), masks.end(), [](const ModalityMask& a, const ModalityMask& b) {
        if (a.count() != b.count()) return a.count() < b.count();
        // lexicographic on sorted index tuples: lowest set bit first
        std::uint32_t x = a.bits, y = b.bits;
        while (x && y) {
            const int ix = __builtin_ctz(x), iy = __builtin_ctz(y);
            if (ix != iy) return ix < iy;
            x &= x - 1;
            y &= y - 1;
        }
        return false;
    });
    return masks;
}

}  // namespace mmseg
