#include "mmseg/data/volume_io.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mmseg {

namespace {

constexpr std::size_t kHeaderSize = 32;

std::string make_header(int d, int h, int w, int j) {
    char buf[kHeaderSize + 1];
    const int n = std::snprintf(buf, sizeof(buf), "MMV1 %d %d %d %d\n", d, h, w, j);
    if (n < 0 || static_cast<std::size_t>(n) > kHeaderSize)
        throw std::invalid_argument("volume_io: dimensions overflow header");
    std::string header(buf, static_cast<std::size_t>(n));
    header.resize(kHeaderSize, ' ');
    return header;
}

void parse_header(std::istream& in, int& d, int& h, int& w, int& j) {
    char buf[kHeaderSize + 1] = {};
    in.read(buf, kHeaderSize);
    if (in.gcount() != static_cast<std::streamsize>(kHeaderSize))
        throw std::runtime_error("volume_io: truncated header");
    if (std::sscanf(buf, "MMV1 %d %d %d %d", &d, &h, &w, &j) != 4)
        throw std::runtime_error("volume_io: bad header");
    if (d < 1 || h < 1 || w < 1 || j < 1)
        throw std::runtime_error("volume_io: bad dimensions in header");
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("volume_io: cannot open for write: " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("volume_io: cannot open for read: " + path);
    return in;
}

}  // namespace

void write_volumes(const std::string& path, const std::vector<Tensor>& volumes) {
    if (volumes.empty()) throw std::invalid_argument("write_volumes: empty list");
    const auto& shape = volumes.front().shape();
    if (shape.size() != 3) throw std::invalid_argument("write_volumes: volumes must be 3D");
    for (const auto& vol : volumes) {
        if (vol.shape() != shape)
            throw std::invalid_argument("write_volumes: shape mismatch");
    }
    auto out = open_out(path);
    const std::string header =
        make_header(shape[0], shape[1], shape[2], static_cast<int>(volumes.size()));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    std::vector<float> row;
    for (const auto& vol : volumes) {
        row.resize(vol.numel());
        for (std::size_t i = 0; i < vol.numel(); ++i) row[i] = static_cast<float>(vol[i]);
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) throw std::runtime_error("write_volumes: write failed: " + path);
}

std::vector<Tensor> read_volumes(const std::string& path) {
    auto in = open_in(path);
    int d, h, w, j;
    parse_header(in, d, h, w, j);
    const std::size_t n = static_cast<std::size_t>(d) * h * w;
    std::vector<Tensor> volumes;
    std::vector<float> row(n);
    for (int m = 0; m < j; ++m) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(n * sizeof(float)));
        if (in.gcount() != static_cast<std::streamsize>(n * sizeof(float)))
            throw std::runtime_error("read_volumes: truncated payload");
        Tensor vol({d, h, w});
        for (std::size_t i = 0; i < n; ++i) vol[i] = static_cast<double>(row[i]);
        volumes.push_back(std::move(vol));
    }
    return volumes;
}

void write_labels(const std::string& path, const LabelVolume& labels) {
    auto out = open_out(path);
    const std::string header = make_header(labels.d, labels.h, labels.w, 1);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(labels.v.data()),
              static_cast<std::streamsize>(labels.v.size()));
    if (!out) throw std::runtime_error("write_labels: write failed: " + path);
}

LabelVolume read_labels(const std::string& path) {
    auto in = open_in(path);
    int d, h, w, j;
    parse_header(in, d, h, w, j);
    if (j != 1) throw std::runtime_error("read_labels: label file must have J=1");
    LabelVolume labels(d, h, w);
    in.read(reinterpret_cast<char*>(labels.v.data()),
            static_cast<std::streamsize>(labels.v.size()));
    if (in.gcount() != static_cast<std::streamsize>(labels.v.size()))
        throw std::runtime_error("read_labels: truncated payload");
    for (std::uint8_t c : labels.v) {
        if (c > 3) throw std::runtime_error("read_labels: label out of {0,1,2,3}");
    }
    return labels;
}

MultiModalSample read_subject_dir(const std::string& dir, const std::string& id,
                                  int modality_count) {
    MultiModalSample sample;
    sample.sample_id = id;
    for (int j = 0; j < modality_count; ++j) {
        auto vols = read_volumes(dir + "/" + id + "_mod" + std::to_string(j) + ".vol");
        if (vols.size() != 1)
            throw std::runtime_error("read_subject_dir: modality file must hold one volume");
        sample.volumes.push_back(std::move(vols.front()));
    }
    sample.labels = read_labels(dir + "/" + id + "_label.vol");
    sample.validate();
    return sample;
}

void write_subject_dir(const std::string& dir, const MultiModalSample& sample) {
    for (int j = 0; j < sample.modality_count(); ++j) {
        write_volumes(dir + "/" + sample.sample_id + "_mod" + std::to_string(j) + ".vol",
                      {sample.volumes[j]});
    }
    write_labels(dir + "/" + sample.sample_id + "_label.vol", sample.labels);
}

}  // namespace mmseg
