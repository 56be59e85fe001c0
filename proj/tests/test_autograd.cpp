#include <doctest.h>

#include <random>

#include "hasn/autograd.hpp"
#include "hasn/metrics.hpp"
#include "hasn/model.hpp"

using namespace hasn;
using autograd::Tape;
using Ids = std::map<std::string, int>;

namespace {

// uniform magnitudes in [0.1, 1.5] with random sign: keeps every entry at
// least 0.1 away from the relu/abs/clamp kinks so central differences with
// step 1e-4 stay on one side
TensorD kink_safe(Shape s, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> mag(0.1, 1.5);
    std::uniform_int_distribution<int> sign(0, 1);
    TensorD t(s);
    for (auto& v : t.data) v = (sign(rng) ? 1.0 : -1.0) * mag(rng);
    return t;
}

TensorD positive(Shape s, unsigned seed, double lo = 0.2, double hi = 2.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    TensorD t(s);
    for (auto& v : t.data) v = dist(rng);
    return t;
}

void expect_pass(const autograd::GradCheckReport& rep) {
    INFO(rep.fail_reason);
    for (const auto& [name, err] : rep.max_rel_err) {
        INFO(name << " max_rel_err=" << err);
        CHECK(err <= 1e-4);
    }
    CHECK(rep.pass);
}

}  // namespace

TEST_CASE("grad: conv2d dense, strided and depthwise") {
    std::map<std::string, TensorD> p;
    p["x"] = kink_safe({2, 3, 6, 6}, 1);
    p["w"] = kink_safe({4, 3, 3, 3}, 2);
    p["b"] = kink_safe({4, 1, 1, 1}, 3);
    expect_pass(autograd::grad_check(
        [](Tape<double>& t, const Ids& ids) {
            return t.mean_all(t.conv2d(ids.at("x"), ids.at("w"), ids.at("b"), 1, 1, 1));
        },
        p, 1e-4));
    expect_pass(autograd::grad_check(
        [](Tape<double>& t, const Ids& ids) {
            return t.mean_all(t.conv2d(ids.at("x"), ids.at("w"), ids.at("b"), 2, 0, 1));
        },
        p, 1e-4));

    std::map<std::string, TensorD> dw;
    dw["x"] = kink_safe({1, 4, 7, 7}, 4);
    dw["w"] = kink_safe({4, 1, 5, 5}, 5);
    dw["b"] = kink_safe({4, 1, 1, 1}, 6);
    expect_pass(autograd::grad_check(
        [](Tape<double>& t, const Ids& ids) {
            return t.mean_all(t.conv2d(ids.at("x"), ids.at("w"), ids.at("b"), 1, 2, 4));
        },
        dw, 1e-4));
}

TEST_CASE("grad: fully connected and layer norm") {
    std::map<std::string, TensorD> p;
    p["x"] = kink_safe({2, 5, 4, 4}, 10);
    p["w"] = kink_safe({7, 5, 1, 1}, 11);
    p["b"] = kink_safe({7, 1, 1, 1}, 12);
    expect_pass(autograd::grad_check(
        [](Tape<double>& t, const Ids& ids) {
            return t.mean_all(t.fully_connected(ids.at("x"), ids.at("w"), ids.at("b")));
        },
        p, 1e-4));

    std::map<std::string, TensorD> ln;
    ln["x"] = kink_safe({2, 6, 3, 3}, 13);
    ln["g"] = kink_safe({1, 6, 1, 1}, 14);
    ln["be"] = kink_safe({1, 6, 1, 1}, 15);
    expect_pass(autograd::grad_check(
        [](Tape<double>& t, const Ids& ids) {
            return t.mean_all(t.layer_norm(ids.at("x"), ids.at("g"), ids.at("be"), 1e-6));
        },
        ln, 1e-4));
}

TEST_CASE("grad: activations") {
    std::map<std::string, TensorD> p;
    p["x"] = kink_safe({1, 3, 5, 5}, 20);
    for (auto kind : {kernels::Act::relu, kernels::Act::relu6, kernels::Act::leaky_relu,
                      kernels::Act::sigmoid, kernels::Act::none}) {
        expect_pass(autograd::grad_check(
            [kind](Tape<double>& t, const Ids& ids) {
                return t.mean_all(t.activation(ids.at("x"), kind));
            },
            p, 1e-4));
    }
}

TEST_CASE("grad: pooling and resize") {
    std::map<std::string, TensorD> p;
    p["x"] = kink_safe({2, 3, 8, 8}, 30);
    expect_pass(autograd::grad_check(
        [](Tape<double>& t, const Ids& ids) { return t.mean_all(t.maxpool(ids.at("x"), 3, 2)); },
        p, 1e-4));
    expect_pass(autograd::grad_check(
        [](Tape<double>& t, const Ids& ids) { return t.mean_all(t.avgpool(ids.at("x"), 2, 2)); },
        p, 1e-4));
    expect_pass(autograd::grad_check(
        [](Tape<double>& t, const Ids& ids) { return t.mean_all(t.global_avg(ids.at("x"))); }, p,
        1e-4));
    expect_pass(autograd::grad_check(
        [](Tape<double>& t, const Ids& ids) {
            return t.mean_all(t.resize_bilinear(ids.at("x"), 13, 11));
        },
        p, 1e-4));
    expect_pass(autograd::grad_check(
        [](Tape<double>& t, const Ids& ids) {
            return t.mean_all(t.resize_bilinear(ids.at("x"), 5, 3));
        },
        p, 1e-4));
}

TEST_CASE("grad: pixel shuffle and elementwise ops") {
    std::map<std::string, TensorD> p;
    p["a"] = kink_safe({1, 8, 4, 4}, 40);
    p["b"] = kink_safe({1, 8, 4, 4}, 41);
    p["s"] = kink_safe({1, 8, 1, 1}, 42);
    expect_pass(autograd::grad_check(
        [](Tape<double>& t, const Ids& ids) {
            return t.mean_all(t.pixel_shuffle(ids.at("a"), 2));
        },
        p, 1e-4));
    expect_pass(autograd::grad_check(
        [](Tape<double>& t, const Ids& ids) {
            return t.mean_all(t.mul(t.add(ids.at("a"), ids.at("b")), t.sub(ids.at("a"), ids.at("b"))));
        },
        p, 1e-4));
    expect_pass(autograd::grad_check(
        [](Tape<double>& t, const Ids& ids) {
            return t.mean_all(t.scale_channels(ids.at("a"), ids.at("s")));
        },
        p, 1e-4));
}

TEST_CASE("grad: scalar chain ops") {
    std::map<std::string, TensorD> p;
    p["x"] = positive({2, 2, 3, 3}, 50);
    expect_pass(autograd::grad_check(
        [](Tape<double>& t, const Ids& ids) { return t.mean_all(t.abs(ids.at("x"))); }, p, 1e-4));
    expect_pass(autograd::grad_check(
        [](Tape<double>& t, const Ids& ids) { return t.mean_all(t.log(ids.at("x"))); }, p, 1e-4));
    expect_pass(autograd::grad_check(
        [](Tape<double>& t, const Ids& ids) {
            return t.scale(t.sum_all(t.add_scalar(ids.at("x"), 0.3)), 0.25);
        },
        p, 1e-4));
    expect_pass(autograd::grad_check(
        [](Tape<double>& t, const Ids& ids) {
            auto q = t.div_per_image(ids.at("x"), t.sum_per_image(ids.at("x")));
            return t.mean_all(t.log(q));
        },
        p, 1e-4));
    // clamp only: interior values away from [0,1] edges by construction
    std::map<std::string, TensorD> c;
    c["x"] = kink_safe({1, 2, 4, 4}, 51);
    expect_pass(autograd::grad_check(
        [](Tape<double>& t, const Ids& ids) { return t.mean_all(t.clamp01(ids.at("x"))); }, c,
        1e-4));
}

TEST_CASE("grad: losses") {
    std::map<std::string, TensorD> p;
    p["sr"] = positive({2, 3, 4, 4}, 60, 0.1, 0.9);
    TensorD hr = positive({2, 3, 4, 4}, 61, 0.1, 0.9);
    // keep |sr-hr| away from the abs kink
    for (size_t i = 0; i < hr.data.size(); ++i)
        if (std::abs(p["sr"].data[i] - hr.data[i]) < 1e-3) hr.data[i] += 0.01;
    expect_pass(autograd::grad_check(
        [&](Tape<double>& t, const Ids& ids) { return metrics::l1_node(t, ids.at("sr"), hr); }, p,
        1e-4));
    expect_pass(autograd::grad_check(
        [&](Tape<double>& t, const Ids& ids) { return metrics::kl_node(t, ids.at("sr"), hr); }, p,
        1e-4));
    metrics::LossWeights w;
    expect_pass(autograd::grad_check(
        [&](Tape<double>& t, const Ids& ids) {
            return metrics::stage2_node(t, ids.at("sr"), hr, w);
        },
        p, 1e-4));
}

TEST_CASE("backward twice doubles parameter gradients exactly") {
    Tape<double> t;
    TensorD x = kink_safe({1, 2, 3, 3}, 70);
    int id = t.param(x, "x");
    int loss = t.mean_all(t.mul(id, id));
    auto g1 = t.backward(loss);
    const TensorD once = g1.at("x");
    auto g2 = t.backward(loss);
    for (size_t i = 0; i < once.data.size(); ++i)
        CHECK(g2.at("x").data[i] == 2.0 * once.data[i]);
    t.zero_grad();
    for (double v : t.param_grads().at("x").data) CHECK(v == 0.0);
}

TEST_CASE("non-participating parameters keep zero gradients") {
    Tape<double> t;
    int a = t.param(kink_safe({1, 1, 2, 2}, 80), "a");
    t.param(kink_safe({1, 1, 2, 2}, 81), "unused");
    auto g = t.backward(t.mean_all(a));
    for (double v : g.at("unused").data) CHECK(v == 0.0);
    CHECK(g.at("a").data[0] == doctest::Approx(0.25));
}

TEST_CASE("backward rejects a non-scalar loss") {
    Tape<double> t;
    int a = t.param(kink_safe({1, 1, 2, 2}, 90), "a");
    CHECK_THROWS_AS(t.backward(a), TensorError);
}
