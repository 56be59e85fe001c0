#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "hasn/checkpoint.hpp"

using namespace hasn;
namespace fs = std::filesystem;

namespace {

std::string tmp_file(const std::string& name) {
    return (fs::temp_directory_path() / name).string();
}

ckpt::Checkpoint sample_ckpt() {
    ckpt::Checkpoint c;
    c.config.dim = 16;
    c.config.num_blocks = 2;
    c.iteration = 123;
    c.params = model::init_params<float>(c.config, 5);
    c.has_optimizer = true;
    c.adam_step = 77;
    for (const auto& [name, t] : c.params) {
        Tensor m(t.shape), v(t.shape);
        for (size_t i = 0; i < m.data.size(); ++i) {
            m.data[i] = float(i) * 0.25f;
            v.data[i] = float(i) * 0.5f + 1.0f;
        }
        c.adam_m[name] = m;
        c.adam_v[name] = v;
    }
    return c;
}

}  // namespace

TEST_CASE("checkpoint round-trips bitwise") {
    const std::string path = tmp_file("hasn_ckpt_rt.hsnc");
    ckpt::Checkpoint c = sample_ckpt();
    ckpt::save_checkpoint(path, c);
    ckpt::Checkpoint back = ckpt::load_checkpoint(path);
    CHECK(back.config.to_text() == c.config.to_text());
    CHECK(back.iteration == 123);
    CHECK(back.has_optimizer);
    CHECK(back.adam_step == 77);
    for (const auto& [name, t] : c.params) {
        CHECK(back.params.at(name).data == t.data);
        CHECK(back.adam_m.at(name).data == c.adam_m.at(name).data);
        CHECK(back.adam_v.at(name).data == c.adam_v.at(name).data);
    }
    fs::remove(path);
}

TEST_CASE("checkpoint without optimizer state") {
    const std::string path = tmp_file("hasn_ckpt_noopt.hsnc");
    ckpt::Checkpoint c = sample_ckpt();
    c.has_optimizer = false;
    c.adam_m.clear();
    c.adam_v.clear();
    ckpt::save_checkpoint(path, c);
    ckpt::Checkpoint back = ckpt::load_checkpoint(path);
    CHECK(!back.has_optimizer);
    CHECK(back.adam_m.empty());
    fs::remove(path);
}

TEST_CASE("checkpoint rejects corruption distinctly") {
    const std::string path = tmp_file("hasn_ckpt_bad.hsnc");
    ckpt::Checkpoint c = sample_ckpt();
    ckpt::save_checkpoint(path, c);

    auto bytes = [&] {
        std::ifstream f(path, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(f), {});
    }();

    auto write_and_load = [&](std::string data) {
        const std::string bad = tmp_file("hasn_ckpt_bad2.hsnc");
        std::ofstream(bad, std::ios::binary) << data;
        return bad;
    };

    SUBCASE("bad magic") {
        std::string d = bytes;
        d[0] = 'X';
        CHECK_THROWS_WITH_AS(ckpt::load_checkpoint(write_and_load(d)),
                             doctest::Contains("magic"), ckpt::CheckpointError);
    }
    SUBCASE("bad version") {
        std::string d = bytes;
        d[4] = 99;
        CHECK_THROWS_WITH_AS(ckpt::load_checkpoint(write_and_load(d)),
                             doctest::Contains("version"), ckpt::CheckpointError);
    }
    SUBCASE("truncation") {
        std::string d = bytes.substr(0, bytes.size() / 2);
        CHECK_THROWS_AS(ckpt::load_checkpoint(write_and_load(d)), ckpt::CheckpointError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(ckpt::load_checkpoint(tmp_file("does_not_exist.hsnc")),
                        ckpt::CheckpointError);
    }
    fs::remove(path);
    fs::remove(tmp_file("hasn_ckpt_bad2.hsnc"));
}
