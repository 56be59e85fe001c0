#include <doctest.h>

#include <cmath>
#include <random>

#include "hasn/metrics.hpp"

using namespace hasn;

TEST_CASE("psnr oracles") {
    TensorD a = TensorD::full({1, 1, 16, 16}, 100.0);
    TensorD b = TensorD::full({1, 1, 16, 16}, 101.0);
    CHECK(metrics::psnr(a, b, 2) == doctest::Approx(48.1308).epsilon(1e-5));
    CHECK(metrics::psnr(a, TensorD::full({1, 1, 16, 16}, 355.0), 2) ==
          doctest::Approx(0.0).scale(1).epsilon(1e-9));
    CHECK(std::isinf(metrics::psnr(a, a, 2)));
}

TEST_CASE("psnr shaves a scale-sized border") {
    TensorD a = TensorD::full({1, 1, 12, 12}, 50.0);
    TensorD b = a;
    // corrupt only the border that a scale-3 shave removes
    for (int i = 0; i < 12; ++i) {
        b.at(0, 0, 0, i) = 250.0;
        b.at(0, 0, 11, i) = 250.0;
        b.at(0, 0, i, 0) = 250.0;
        b.at(0, 0, i, 11) = 250.0;
    }
    CHECK(std::isinf(metrics::psnr(a, b, 3)));
    CHECK(!std::isinf(metrics::psnr(a, b, 0)));
}

TEST_CASE("ssim oracles") {
    TensorD a = TensorD::full({1, 1, 20, 20}, 100.0);
    CHECK(metrics::ssim(a, a, 2) == 1.0);

    TensorD b = TensorD::full({1, 1, 20, 20}, 110.0);
    const double c1 = (0.01 * 255) * (0.01 * 255);
    const double expected = (2.0 * 100 * 110 + c1) / (100.0 * 100 + 110.0 * 110 + c1);
    CHECK(metrics::ssim(a, b, 2) == doctest::Approx(expected).epsilon(1e-9));
    CHECK(metrics::ssim(a, b, 2) == doctest::Approx(0.99548).epsilon(2e-5));
}

TEST_CASE("ssim is symmetric on random pairs") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 5; ++i) {
        TensorD a = TensorD::uniform({1, 1, 15, 17}, rng, 0.0, 255.0);
        TensorD b = TensorD::uniform({1, 1, 15, 17}, rng, 0.0, 255.0);
        CHECK(metrics::ssim(a, b, 1) == doctest::Approx(metrics::ssim(b, a, 1)).epsilon(1e-12));
    }
}

TEST_CASE("rgb_to_y oracles") {
    Tensor white = Tensor::full({1, 3, 4, 4}, 1.0f);
    auto y = metrics::rgb_to_y(white);
    CHECK(y.shape == Shape{1, 1, 4, 4});
    CHECK(y.data[0] == doctest::Approx(235.0).epsilon(1e-6));
    Tensor black(1, 3, 4, 4);
    CHECK(metrics::rgb_to_y(black).data[0] == doctest::Approx(16.0).epsilon(1e-9));
}

TEST_CASE("kl loss oracles") {
    // two pixels with p_HR=(0.5,0.5) and p_SR=(0.25,0.75)
    Tensor hr(1, 1, 1, 2);
    hr.data = {0.5f, 0.5f};
    Tensor sr(1, 1, 1, 2);
    sr.data = {0.25f, 0.75f};
    const double expected = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);
    CHECK(metrics::kl_loss(sr, hr) == doctest::Approx(expected).epsilon(1e-6));
    CHECK(metrics::kl_loss(sr, hr) == doctest::Approx(0.14384).epsilon(1e-4));
    CHECK(metrics::kl_loss(hr, hr) == doctest::Approx(0.0).scale(1).epsilon(1e-9));
}

TEST_CASE("kl loss is nonnegative on random pairs") {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 1000; ++i) {
        Tensor a = Tensor::uniform({2, 3, 4, 4}, rng, 0.0f, 1.0f);
        Tensor b = Tensor::uniform({2, 3, 4, 4}, rng, 0.0f, 1.0f);
        CHECK(metrics::kl_loss(a, b) >= -1e-9);
    }
}

TEST_CASE("l1 and stage2 losses") {
    Tensor a = Tensor::full({1, 3, 2, 2}, 0.5f);
    Tensor b = Tensor::full({1, 3, 2, 2}, 0.25f);
    CHECK(metrics::l1_loss(a, b) == doctest::Approx(0.25).epsilon(1e-7));
    metrics::LossWeights w;
    CHECK(metrics::stage2_loss(a, b, w) ==
          doctest::Approx(metrics::l1_loss(a, b) + metrics::kl_loss(a, b)).epsilon(1e-9));
    // uniform images have identical distributions, so the KL term vanishes
    CHECK(metrics::kl_loss(a, b) == doctest::Approx(0.0).scale(1).epsilon(1e-6));
}

TEST_CASE("taped losses agree with the eager ones") {
    std::mt19937_64 rng(23);
    for (int i = 0; i < 10; ++i) {
        Tensor sr = Tensor::uniform({2, 3, 4, 4}, rng, 0.05f, 0.95f);
        Tensor hr = Tensor::uniform({2, 3, 4, 4}, rng, 0.05f, 0.95f);
        autograd::Tape<float> t;
        int id = t.input(sr);
        CHECK(double(t.value(metrics::l1_node(t, id, hr)).data[0]) ==
              doctest::Approx(metrics::l1_loss(sr, hr)).epsilon(1e-5));
        CHECK(double(t.value(metrics::kl_node(t, id, hr)).data[0]) ==
              doctest::Approx(metrics::kl_loss(sr, hr)).epsilon(1e-4));
    }
}
