#pragma once

#include <string>

#include "mmseg/nets/model.hpp"

namespace mmseg {

// Single-file binary archive: magic "MMCK1\n", model configuration, then the
// named parameter tensors as raw little-endian doubles. Round-trips bit-exact.
void save_checkpoint(const std::string& path, SegModel& model);
SegModel load_checkpoint(const std::string& path);

}  // namespace mmseg
