#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "mmseg/core/rng.hpp"
#include "mmseg/metrics/segmetrics.hpp"
#include "mmseg/nets/checkpoint.hpp"
#include "mmseg/nets/model.hpp"

using namespace mmseg;

namespace {

Tensor random_volume(int d, int h, int w, std::uint64_t seed) {
    Tensor v({d, h, w});
    Rng rng(seed);
    for (std::size_t i = 0; i < v.numel(); ++i) v[i] = rng.uniform(-1.0, 1.0);
    return v;
}

ModelConfig tiny_config() {
    ModelConfig mc;
    mc.modality_count = 2;
    mc.encoder.base_channels = 2;
    mc.encoder.max_channels = 4;
    mc.encoder.latent_channels = 2;
    mc.encoder.downsample_factor = 2;
    mc.predictor_base_channels = 2;
    return mc;
}

}  // namespace

TEST_CASE("encoder produces the documented latent shape") {
    ModelConfig mc;
    mc.encoder.latent_channels = 8;
    mc.encoder.downsample_factor = 4;
    auto model = SegModel::create(mc, 3);
    const auto lat = model.encode(random_volume(32, 32, 32, 1), 0);
    CHECK(lat.values.shape() == std::vector<int>{8, 8, 8, 8});
    CHECK(lat.modality == 0);
}

TEST_CASE("encoders with copied weights produce identical latents") {
    auto model = SegModel::create(tiny_config(), 17);
    // copy encoder 0's weights onto encoder 1
    model.encoders[1] = model.encoders[0];
    const Tensor vol = random_volume(8, 8, 8, 2);
    const auto a = model.encode(vol, 0);
    const auto b = model.encode(vol, 1);
    CHECK(a.values.vec() == b.values.vec());
}

TEST_CASE("evaluation passes are bitwise deterministic") {
    auto model = SegModel::create(tiny_config(), 5);
    const Tensor vol = random_volume(8, 8, 8, 9);
    const auto a = model.encode(vol, 1);
    const auto b = model.encode(vol, 1);
    CHECK(a.values.vec() == b.values.vec());
    const Tensor p1 = model.predict_segmentation(a.values);
    const Tensor p2 = model.predict_segmentation(b.values);
    CHECK(p1.vec() == p2.vec());
}

TEST_CASE("encode rejects shapes not divisible by the downsample factor") {
    ModelConfig mc;
    mc.encoder.downsample_factor = 4;
    auto model = SegModel::create(mc, 1);
    CHECK_THROWS_AS(model.encode(random_volume(30, 32, 32, 3), 0),
                    std::invalid_argument);
}

TEST_CASE("predicted probabilities are a proper distribution per voxel") {
    auto model = SegModel::create(tiny_config(), 11);
    const auto lat = model.encode(random_volume(8, 8, 8, 4), 0);
    const Tensor probs = model.predict_segmentation(lat.values);
    REQUIRE(probs.shape() == std::vector<int>{4, 8, 8, 8});
    const std::size_t vox = 8 * 8 * 8;
    for (std::size_t i = 0; i < vox; ++i) {
        double s = 0.0;
        for (int c = 0; c < 4; ++c) {
            const double p = probs[c * vox + i];
            CHECK(p >= 0.0);
            s += p;
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("zeroed predictor parameters yield uniform class probabilities") {
    auto model = SegModel::create(tiny_config(), 19);
    model.visit_params([](const std::string& name, Tensor& p, Tensor&) {
        if (name.rfind("pred.", 0) == 0) p.zero();
    });
    const auto lat = model.encode(random_volume(8, 8, 8, 6), 0);
    const Tensor probs = model.predict_segmentation(lat.values);
    for (std::size_t i = 0; i < probs.numel(); ++i) {
        CHECK(probs[i] == doctest::Approx(0.25).epsilon(1e-12));
    }
}

TEST_CASE("predictor restores the input spatial shape") {
    for (int ds : {2, 4}) {
        ModelConfig mc = tiny_config();
        mc.encoder.downsample_factor = ds;
        auto model = SegModel::create(mc, 7);
        for (int side : {8, 16}) {
            const auto lat = model.encode(random_volume(side, side, side, 8), 0);
            const Tensor logits = model.predict_logits(lat.values);
            CHECK(logits.shape() == std::vector<int>{4, side, side, side});
        }
    }
}

TEST_CASE("softmax channels sums to one and backward matches finite differences") {
    Tensor logits({4, 1, 1, 1}, {0.3, -1.2, 2.0, 0.0});
    const Tensor probs = softmax_channels(logits);
    double s = 0.0;
    for (int c = 0; c < 4; ++c) s += probs[c];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));

    // d(Σ a_c p_c)/dlogit via chain rule vs central differences
    Tensor g_probs({4, 1, 1, 1}, {0.7, -0.4, 0.1, 0.9});
    const Tensor g_logits = softmax_backward(probs, g_probs);
    const double h = 1e-6;
    for (int c = 0; c < 4; ++c) {
        Tensor lp = logits, lm = logits;
        lp[c] += h;
        lm[c] -= h;
        const Tensor pp = softmax_channels(lp), pm = softmax_channels(lm);
        double fp = 0.0, fm = 0.0;
        for (int q = 0; q < 4; ++q) {
            fp += g_probs[q] * pp[q];
            fm += g_probs[q] * pm[q];
        }
        CHECK(g_logits[c] == doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-6));
    }
}

TEST_CASE("mean fusion follows the documented arithmetic") {
    ModelConfig mc = tiny_config();
    mc.modality_count = 3;
    auto model = SegModel::create(mc, 23);

    LatentFeatures a, b, c;
    a.values = Tensor({2, 1, 1, 1}, {2.0, 4.0});
    a.modality = 0;
    b.values = Tensor({2, 1, 1, 1}, {6.0, 0.0});
    b.modality = 1;
    c.values = Tensor({2, 1, 1, 1}, {-2.0, 2.0});
    c.modality = 2;

    // single-modality mask is the identity
    const Tensor single = model.fuse_latents({a, b, c}, ModalityMask::single(1, 3));
    CHECK(single.vec() == b.values.vec());

    // mask {1,2} -> (b+c)/2
    ModalityMask m12;
    m12.modality_count = 3;
    m12.bits = 0b110;
    const Tensor two = model.fuse_latents({a, b, c}, m12);
    CHECK(two[0] == doctest::Approx(2.0));
    CHECK(two[1] == doctest::Approx(1.0));

    // two identical latents -> same latent (idempotence)
    LatentFeatures b2 = b;
    b2.modality = 2;
    const Tensor same = model.fuse_latents({a, b, b2}, m12);
    CHECK(same.vec() == b.values.vec());

    // permutation invariance
    ModalityMask all;
    all.modality_count = 3;
    all.bits = 0b111;
    const Tensor o1 = model.fuse_latents({a, b, c}, all);
    const Tensor o2 = model.fuse_latents({c, a, b}, all);
    CHECK(o1.vec() == o2.vec());

    ModalityMask empty;
    empty.modality_count = 3;
    CHECK_THROWS_AS(model.fuse_latents({a, b, c}, empty), std::invalid_argument);
}

TEST_CASE("concat fusion places channels by modality and zero-fills gaps") {
    ModelConfig mc = tiny_config();
    mc.fusion = FusionMode::concat;
    auto model = SegModel::create(mc, 29);
    CHECK(mc.predictor_in_channels() == 4);

    LatentFeatures a, b;
    a.values = Tensor({2, 1, 1, 1}, {1.0, 2.0});
    a.modality = 0;
    b.values = Tensor({2, 1, 1, 1}, {3.0, 4.0});
    b.modality = 1;

    const Tensor both = model.fuse_latents({a, b}, ModalityMask::full(2));
    CHECK(both.vec() == std::vector<double>{1.0, 2.0, 3.0, 4.0});

    const Tensor only1 = model.fuse_latents({a, b}, ModalityMask::single(1, 2));
    CHECK(only1.vec() == std::vector<double>{0.0, 0.0, 3.0, 4.0});
}

TEST_CASE("analytic gradients of encode-predict-cross-entropy match finite differences") {
    ModelConfig mc = tiny_config();
    mc.modality_count = 1;
    auto model = SegModel::create(mc, 101);
    REQUIRE(model.param_count() <= 1000);
    // zero-initialized biases leave pre-activations exactly on the relu kink,
    // where finite differences are one-sided; move off it
    Rng jitter(7);
    model.visit_params([&](const std::string& name, Tensor& p, Tensor&) {
        if (name.size() > 2 && name.substr(name.size() - 2) == ".b") {
            for (std::size_t i = 0; i < p.numel(); ++i) p[i] = jitter.uniform(-0.1, 0.1);
        }
    });

    const Tensor vol = random_volume(2, 2, 2, 55);
    LabelVolume gt(2, 2, 2);
    for (std::size_t i = 0; i < gt.size(); ++i) gt.v[i] = static_cast<std::uint8_t>(i % 4);

    auto loss_fn = [&]() {
        const auto lat = model.encode(vol, 0);
        const Tensor probs = model.predict_segmentation(model.training_fusion(lat));
        return cross_entropy_loss(probs, gt);
    };

    // analytic pass
    model.zero_grad();
    Encoder::Acts eacts;
    const auto lat = model.encode(vol, 0, &eacts);
    Predictor::Acts pacts;
    const Tensor logits = model.predict_logits(model.training_fusion(lat), &pacts);
    const Tensor probs = softmax_channels(logits);
    Tensor g_probs(probs.shape());
    cross_entropy_loss(probs, gt, &g_probs);
    const Tensor g_logits = softmax_backward(probs, g_probs);
    const Tensor g_latent = model.predictor.backward(pacts, g_logits);
    model.encoders[0].backward(eacts, g_latent, nullptr);

    const double step = 1e-3;
    int checked = 0;
    model.visit_params([&](const std::string& name, Tensor& p, Tensor& g) {
        if (name == "theta") return;
        for (std::size_t i = 0; i < p.numel(); ++i) {
            const double saved = p[i];
            p[i] = saved + step;
            const double fp = loss_fn();
            p[i] = saved - step;
            const double fm = loss_fn();
            p[i] = saved;
            const double fd = (fp - fm) / (2 * step);
            const double denom = std::max({std::abs(fd), std::abs(g[i]), 1e-6});
            CHECK(std::abs(fd - g[i]) / denom < 1e-4);
            ++checked;
        }
    });
    CHECK(checked > 100);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    const auto dir = std::filesystem::temp_directory_path() / "mmseg_ckpt_test";
    std::filesystem::create_directories(dir);
    const std::string p1 = (dir / "a.ckpt").string();
    const std::string p2 = (dir / "b.ckpt").string();

    ModelConfig mc = tiny_config();
    mc.anchor.kind = AnchorKind::adaptive;
    mc.anchor.base_k = 1;
    auto model = SegModel::create(mc, 404);
    model.step_count = 1234;
    model.theta[0] = 0.25;

    save_checkpoint(p1, model);
    auto loaded = load_checkpoint(p1);
    CHECK(loaded.cfg.modality_count == mc.modality_count);
    CHECK(loaded.cfg.anchor.kind == AnchorKind::adaptive);
    CHECK(loaded.init_seed == 404);
    CHECK(loaded.step_count == 1234);
    CHECK(loaded.theta.vec() == model.theta.vec());

    // identical forward behaviour
    const Tensor vol = random_volume(8, 8, 8, 77);
    CHECK(loaded.encode(vol, 0).values.vec() == model.encode(vol, 0).values.vec());

    // re-saving the loaded model reproduces the file byte for byte
    save_checkpoint(p2, loaded);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), {});
    const std::string b2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(b1 == b2);
    CHECK(!b1.empty());
    CHECK(b1.substr(0, 6) == "MMCK1\n");
}
