#include <doctest.h>

#include <random>

#include "hasn/kernels.hpp"
#include "hasn/tensor.hpp"
#include "oracles.hpp"

using namespace hasn;
using oracles::rel_diff;

namespace {
std::mt19937_64 rng_for(int i) { return std::mt19937_64(0xC0FFEEu + unsigned(i)); }
}  // namespace

TEST_CASE("tensor basics") {
    Tensor t(2, 3, 4, 5);
    CHECK(t.numel() == 120);
    CHECK(t.data.size() == 120);
    t.at(1, 2, 3, 4) = 7.0f;
    CHECK(t.plane(1, 2)[3 * 5 + 4] == 7.0f);
    CHECK_THROWS_AS(Tensor(0, 1, 1, 1), TensorError);
}

TEST_CASE("conv2d matches the direct-loop reference") {
    for (int i = 0; i < 24; ++i) {
        auto rng = rng_for(i);
        std::uniform_int_distribution<int> chan(1, 6), sz(5, 12), kk(0, 2);
        const int ci = chan(rng), co = chan(rng), h = sz(rng), w = sz(rng);
        const int k = 2 * kk(rng) + 1;
        const int pad = k / 2;
        const int stride = (i % 3 == 2) ? 2 : 1;
        Tensor x = Tensor::uniform({2, ci, h, w}, rng);
        Tensor wt = Tensor::uniform({co, ci, k, k}, rng);
        Tensor b = Tensor::uniform({co, 1, 1, 1}, rng);
        Tensor got = kernels::conv2d(x, wt, b, stride, pad, 1);
        Tensor want = oracles::conv2d_ref(x, wt, b, stride, pad, 1);
        CHECK(rel_diff(got, want) <= 1e-5);
    }
}

TEST_CASE("depthwise conv2d matches the reference") {
    for (int i = 0; i < 20; ++i) {
        auto rng = rng_for(100 + i);
        std::uniform_int_distribution<int> chan(2, 8), sz(7, 14), kk(1, 3);
        const int c = chan(rng), h = sz(rng), w = sz(rng);
        const int k = 2 * kk(rng) + 1;
        Tensor x = Tensor::uniform({1, c, h, w}, rng);
        Tensor wt = Tensor::uniform({c, 1, k, k}, rng);
        Tensor b = Tensor::uniform({c, 1, 1, 1}, rng);
        Tensor got = kernels::conv2d(x, wt, b, 1, k / 2, c);
        Tensor want = oracles::conv2d_ref(x, wt, b, 1, k / 2, c);
        CHECK(rel_diff(got, want) <= 1e-5);
    }
}

TEST_CASE("grouped conv2d matches the reference") {
    for (int i = 0; i < 20; ++i) {
        auto rng = rng_for(200 + i);
        const int g = (i % 2) ? 2 : 4;
        std::uniform_int_distribution<int> mult(1, 3), sz(6, 10);
        const int ci = g * mult(rng), co = g * mult(rng);
        Tensor x = Tensor::uniform({1, ci, sz(rng), sz(rng)}, rng);
        Tensor wt = Tensor::uniform({co, ci / g, 3, 3}, rng);
        Tensor b = Tensor::uniform({co, 1, 1, 1}, rng);
        CHECK(rel_diff(kernels::conv2d(x, wt, b, 1, 1, g),
                       oracles::conv2d_ref(x, wt, b, 1, 1, g)) <= 1e-5);
    }
}

TEST_CASE("conv2d validates shapes with a named message") {
    Tensor x(1, 3, 8, 8), w(4, 5, 3, 3), b(4, 1, 1, 1);
    CHECK_THROWS_WITH_AS(kernels::conv2d(x, w, b, 1, 1, 1),
                         doctest::Contains("channel"), TensorError);
}

TEST_CASE("pooling matches the reference") {
    for (int i = 0; i < 20; ++i) {
        auto rng = rng_for(300 + i);
        std::uniform_int_distribution<int> sz(6, 15), kd(2, 4);
        const int k = kd(rng), stride = (i % 2) + 1;
        Tensor x = Tensor::uniform({2, 3, sz(rng), sz(rng)}, rng);
        CHECK(rel_diff(kernels::pool2d(x, kernels::Pool::max, k, stride),
                       oracles::maxpool_ref(x, k, stride)) <= 1e-5);
        CHECK(rel_diff(kernels::pool2d(x, kernels::Pool::avg, k, stride),
                       oracles::avgpool_ref(x, k, stride)) <= 1e-5);
        CHECK(rel_diff(kernels::pool2d(x, kernels::Pool::global_avg),
                       oracles::global_avg_ref(x)) <= 1e-5);
    }
}

TEST_CASE("bilinear resize matches the reference") {
    for (int i = 0; i < 20; ++i) {
        auto rng = rng_for(400 + i);
        std::uniform_int_distribution<int> sz(3, 14);
        Tensor x = Tensor::uniform({1, 2, sz(rng), sz(rng)}, rng);
        const int oh = sz(rng), ow = sz(rng);
        CHECK(rel_diff(kernels::resize_bilinear(x, oh, ow), oracles::bilinear_ref(x, oh, ow)) <=
              1e-5);
    }
}

TEST_CASE("layer norm matches the reference and normalizes") {
    for (int i = 0; i < 10; ++i) {
        auto rng = rng_for(500 + i);
        const int c = 8;
        Tensor x = Tensor::uniform({2, c, 5, 5}, rng, -3.0f, 3.0f);
        Tensor gm = Tensor::uniform({1, c, 1, 1}, rng);
        Tensor bt = Tensor::uniform({1, c, 1, 1}, rng);
        Tensor got = kernels::layer_norm_channels(x, gm, bt, 1e-6f);
        CHECK(rel_diff(got, oracles::layer_norm_ref(x, gm, bt, 1e-6)) <= 1e-5);
    }
    auto rng2 = rng_for(599);
    Tensor x = Tensor::uniform({1, 16, 3, 3}, rng2);
    Tensor gm = Tensor::ones({1, 16, 1, 1});
    Tensor bt(1, 16, 1, 1);
    Tensor y = kernels::layer_norm_channels(x, gm, bt, 1e-6f);
    for (int s = 0; s < 9; ++s) {
        double mean = 0, var = 0;
        for (int c = 0; c < 16; ++c) mean += y.plane(0, c)[s];
        mean /= 16;
        for (int c = 0; c < 16; ++c) var += (y.plane(0, c)[s] - mean) * (y.plane(0, c)[s] - mean);
        var /= 16;
        CHECK(std::abs(mean) < 1e-5);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("pixel shuffle round-trips and rearranges") {
    auto rng = rng_for(600);
    Tensor x = Tensor::uniform({2, 12, 4, 5}, rng);
    Tensor y = kernels::pixel_shuffle(x, 2);
    CHECK(y.shape == Shape{2, 3, 8, 10});
    CHECK(rel_diff(kernels::pixel_unshuffle(y, 2), x) == 0.0);
    // output pixel (2y+dy, 2x+dx) of channel c comes from channel c*4+dy*2+dx
    CHECK(y.at(0, 1, 3, 4) == x.at(0, 1 * 4 + 1 * 2 + 0, 1, 2));
}

TEST_CASE("activations") {
    Tensor x(1, 1, 1, 5);
    x.data = {-2.0f, 0.0f, 3.0f, 6.5f, 100.0f};
    Tensor r6 = kernels::activation(x, kernels::Act::relu6);
    CHECK(r6.data == std::vector<float>{0.0f, 0.0f, 3.0f, 6.0f, 6.0f});
    Tensor lr = kernels::activation(x, kernels::Act::leaky_relu);
    CHECK(lr.data[0] == doctest::Approx(-2.0f * kernels::kLeakySlope));
    Tensor sg = kernels::activation(x, kernels::Act::sigmoid);
    CHECK(sg.data[1] == doctest::Approx(0.5));
    CHECK(sg.data[4] == doctest::Approx(1.0));
}

TEST_CASE("dihedral transforms compose to identity") {
    auto rng = rng_for(700);
    Tensor x = Tensor::uniform({1, 2, 5, 7}, rng);
    using namespace kernels;
    CHECK(rel_diff(rot270(rot90(x)), x) == 0.0);
    CHECK(rel_diff(rot180(rot180(x)), x) == 0.0);
    CHECK(rel_diff(rot90(rot90(x)), rot180(x)) == 0.0);
    CHECK(rel_diff(flip_h(flip_h(x)), x) == 0.0);
}
