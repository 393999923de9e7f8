#include "mmseg/nets/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace mmseg {

namespace {

constexpr char kMagic[6] = {'M', 'M', 'C', 'K', '1', '\n'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, SegModel& model) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot open for write: " + path);
    out.write(kMagic, sizeof(kMagic));

    const ModelConfig& c = model.cfg;
    write_pod<std::int32_t>(out, c.modality_count);
    write_pod<std::int32_t>(out, c.encoder.base_channels);
    write_pod<std::int32_t>(out, c.encoder.max_channels);
    write_pod<std::int32_t>(out, c.encoder.latent_channels);
    write_pod<std::int32_t>(out, c.encoder.downsample_factor);
    write_pod<std::int32_t>(out, c.predictor_base_channels);
    write_pod<std::int32_t>(out, static_cast<std::int32_t>(c.anchor.kind));
    write_pod<std::int32_t>(out, c.anchor.base_k);
    write_pod<std::int32_t>(out, static_cast<std::int32_t>(c.anchor.variant));
    write_pod<std::int32_t>(out, static_cast<std::int32_t>(c.fusion));
    write_pod<std::uint64_t>(out, model.init_seed);
    write_pod<std::uint64_t>(out, model.step_count);

    std::uint64_t count = 0;
    model.visit_params([&](const std::string&, Tensor&, Tensor&) { ++count; });
    write_pod<std::uint64_t>(out, count);
    model.visit_params([&](const std::string& name, Tensor& p, Tensor&) {
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p.shape().size()));
        for (int d : p.shape()) write_pod<std::int32_t>(out, d);
        out.write(reinterpret_cast<const char*>(p.data()),
                  static_cast<std::streamsize>(p.numel() * sizeof(double)));
    });
    if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
}

SegModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open for read: " + path);
    char magic[6];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("checkpoint: bad magic");

    ModelConfig c;
    c.modality_count = read_pod<std::int32_t>(in);
    c.encoder.base_channels = read_pod<std::int32_t>(in);
    c.encoder.max_channels = read_pod<std::int32_t>(in);
    c.encoder.latent_channels = read_pod<std::int32_t>(in);
    c.encoder.downsample_factor = read_pod<std::int32_t>(in);
    c.predictor_base_channels = read_pod<std::int32_t>(in);
    c.anchor.kind = static_cast<AnchorKind>(read_pod<std::int32_t>(in));
    c.anchor.base_k = read_pod<std::int32_t>(in);
    c.anchor.variant = static_cast<NormalVariant>(read_pod<std::int32_t>(in));
    c.fusion = static_cast<FusionMode>(read_pod<std::int32_t>(in));
    const std::uint64_t init_seed = read_pod<std::uint64_t>(in);
    const std::uint64_t step_count = read_pod<std::uint64_t>(in);

    SegModel model = SegModel::create(c, init_seed);
    model.step_count = step_count;

    std::map<std::string, Tensor*> params;
    model.visit_params(
        [&](const std::string& name, Tensor& p, Tensor&) { params[name] = &p; });

    const std::uint64_t count = read_pod<std::uint64_t>(in);
    if (count != params.size())
        throw std::runtime_error("checkpoint: tensor count mismatch");
    for (std::uint64_t t = 0; t < count; ++t) {
        const std::uint32_t name_len = read_pod<std::uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const std::uint32_t ndim = read_pod<std::uint32_t>(in);
        std::vector<int> shape(ndim);
        for (auto& d : shape) d = read_pod<std::int32_t>(in);
        auto it = params.find(name);
        if (it == params.end())
            throw std::runtime_error("checkpoint: unknown tensor " + name);
        if (it->second->shape() != shape)
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        in.read(reinterpret_cast<char*>(it->second->data()),
                static_cast<std::streamsize>(it->second->numel() * sizeof(double)));
        if (!in) throw std::runtime_error("checkpoint: truncated tensor " + name);
    }
    return model;
}

}  // namespace mmseg
