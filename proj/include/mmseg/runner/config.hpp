#pragma once

#include <cstdint>
#include <string>

#include "mmseg/data/phantom.hpp"
#include "mmseg/distill/distill.hpp"
#include "mmseg/nets/model.hpp"

namespace mmseg {

struct DatasetSpec {
    enum class Kind { synthetic, directory } kind = Kind::synthetic;
    // synthetic
    int count = 16;
    PhantomConfig phantom;
    // directory ingestion
    std::string path;
    int modality_count = 4;
};

struct OptimSpec {
    double learning_rate = 1e-3;
    double decay = 1e-5;  // subtracted per epoch
    double lr_floor = 1e-5;
    int batch_size = 4;

    // lr after `epoch` completed epochs
    double lr_at(int epoch) const {
        const double lr = learning_rate - static_cast<double>(epoch) * decay;
        return lr > lr_floor ? lr : lr_floor;
    }
};

struct TrainConfig {
    DatasetSpec dataset;
    int crop_d = 16, crop_h = 16, crop_w = 16;
    ModelConfig model;
    double lambda_align = 1.0;
    OptimSpec optim;
    int epochs = 10;
    int student_epochs = 10;
    DistillConfig distill;
    std::uint64_t seed = 1;
    int holdout = 4;  // samples reserved for evaluation / gap tracking

    void validate() const;
    int modality_count() const {
        return dataset.kind == DatasetSpec::Kind::synthetic
                   ? dataset.phantom.modality_count
                   : dataset.modality_count;
    }
};

// JSON config file; absent fields keep their defaults.
TrainConfig load_config(const std::string& path);
TrainConfig parse_config(const std::string& json_text);
std::string config_to_json(const TrainConfig& config);

}  // namespace mmseg
