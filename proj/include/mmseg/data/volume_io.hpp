#pragma once

#include <string>
#include <vector>

#include "mmseg/data/sample.hpp"

namespace mmseg {

// MMV1 container: 32-byte ASCII header "MMV1 <D> <H> <W> <J>\n" padded with
// trailing spaces, followed by the payload. Intensity volumes are stored as
// little-endian float32, J volumes back to back; label volumes use J=1 and a
// uint8 payload. Round-trips are bit-exact.

void write_volumes(const std::string& path, const std::vector<Tensor>& volumes);
std::vector<Tensor> read_volumes(const std::string& path);

void write_labels(const std::string& path, const LabelVolume& labels);
LabelVolume read_labels(const std::string& path);

// Ingestion adapter: reads a directory of per-subject files named
// "<id>_mod<j>.vol" (one modality each) and "<id>_label.vol".
MultiModalSample read_subject_dir(const std::string& dir, const std::string& id,
                                  int modality_count);
void write_subject_dir(const std::string& dir, const MultiModalSample& sample);

}  // namespace mmseg
