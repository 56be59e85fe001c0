#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "hasn/bicubic.hpp"
#include "hasn/dataset.hpp"
#include "hasn/image_io.hpp"
#include "oracles.hpp"

using namespace hasn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("hasn_test_" + tag)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("bicubic matches the per-pixel reference") {
    std::mt19937_64 rng(31);
    for (int i = 0; i < 20; ++i) {
        std::uniform_int_distribution<int> sz(8, 24);
        Tensor x = Tensor::uniform({1, 3, sz(rng), sz(rng)}, rng, 0.0f, 1.0f);
        const double scale = (i % 2) ? 0.25 : 2.0;
        CHECK(oracles::rel_diff(data::bicubic_resize(x, scale), oracles::bicubic_ref(x, scale)) <=
              1e-5);
    }
}

TEST_CASE("bicubic identity and output sizing") {
    std::mt19937_64 rng(37);
    Tensor x = Tensor::uniform({1, 3, 10, 14}, rng);
    Tensor same = data::bicubic_resize(x, 1.0);
    for (size_t i = 0; i < x.data.size(); ++i) CHECK(same.data[i] == x.data[i]);

    Tensor up = data::bicubic_resize(x, 1.5);
    CHECK(up.h() == 15);
    CHECK(up.w() == 21);
    Tensor down = data::bicubic_resize(x, 0.5);
    CHECK(down.h() == 5);
    CHECK(down.w() == 7);
}

TEST_CASE("bicubic preserves constants") {
    Tensor x = Tensor::full({1, 1, 12, 12}, 0.63f);
    for (double s : {0.25, 0.5, 2.0, 4.0}) {
        Tensor y = data::bicubic_resize(x, s);
        for (float v : y.data) CHECK(v == doctest::Approx(0.63f).epsilon(1e-6));
    }
}

TEST_CASE("png and ppm round-trip through 8 bits") {
    TempDir dir("io");
    std::mt19937_64 rng(41);
    Tensor img = Tensor::uniform({1, 3, 9, 13}, rng, 0.0f, 1.0f);
    for (const char* ext : {".png", ".ppm"}) {
        const std::string path = (dir.path / (std::string("img") + ext)).string();
        io::save_image(path, img);
        Tensor back = io::load_image(path);
        CHECK(back.shape == img.shape);
        for (size_t i = 0; i < img.data.size(); ++i)
            CHECK(std::abs(back.data[i] - img.data[i]) <= 0.5f / 255.0f + 1e-6f);
        // a second load is bitwise identical
        Tensor again = io::load_image(path);
        CHECK(again.data == back.data);
    }
}

TEST_CASE("pgm loads as replicated gray") {
    TempDir dir("pgm");
    const std::string path = (dir.path / "g.pgm").string();
    {
        std::ofstream f(path, std::ios::binary);
        f << "P5\n3 2\n255\n";
        const unsigned char px[6] = {0, 64, 128, 192, 255, 10};
        f.write(reinterpret_cast<const char*>(px), 6);
    }
    Tensor img = io::load_image(path);
    CHECK(img.shape == Shape{1, 3, 2, 3});
    CHECK(img.at(0, 0, 0, 1) == img.at(0, 2, 0, 1));
    CHECK(img.at(0, 1, 1, 1) == doctest::Approx(1.0f));
}

TEST_CASE("quantize8 rounds half up and clamps") {
    CHECK(io::quantize8(-0.5f) == 0);
    CHECK(io::quantize8(2.0f) == 255);
    CHECK(io::quantize8(0.5f / 255.0f) == 1);
    CHECK(io::quantize8(0.49f / 255.0f) == 0);
}

TEST_CASE("synthetic images are deterministic and in range") {
    Tensor a = data::synth_image(32, 48, 99);
    Tensor b = data::synth_image(32, 48, 99);
    CHECK(a.data == b.data);
    Tensor c = data::synth_image(32, 48, 100);
    CHECK(a.data != c.data);
    for (float v : a.data) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
}

TEST_CASE("scan pairs by stem and warns on mismatches") {
    TempDir hr("scan_hr");
    TempDir lr("scan_lr");
    Tensor img = Tensor::full({1, 3, 8, 8}, 0.5f);
    io::save_image((hr.path / "a.png").string(), img);
    io::save_image((hr.path / "b.png").string(), img);
    io::save_image((hr.path / "c.png").string(), img);
    io::save_image((lr.path / "a.png").string(), img);
    io::save_image((lr.path / "b.png").string(), img);
    io::save_image((lr.path / "zz.png").string(), img);

    data::DatasetSpec spec;
    spec.hr_dirs = {hr.path.string()};
    spec.lr_dir = lr.path.string();
    spec.scale = 2;
    spec.patch_hr = 2;
    auto res = data::scan_dataset(spec);
    CHECK(res.pairs.size() == 2);
    CHECK(res.warnings.size() == 2);  // c without LR, zz without HR
    CHECK(res.pairs[0].stem == "a");
    CHECK(res.pairs[1].stem == "b");
}

TEST_CASE("scan merges multiple hr dirs in order") {
    data::DatasetSpec spec;
    spec.hr_dirs = {"synth:3:32:1", "synth:2:32:50"};
    auto res = data::scan_dataset(spec);
    CHECK(res.pairs.size() == 5);
    CHECK(res.warnings.empty());
}

TEST_CASE("load_pair crops to a scale multiple and degrades") {
    TempDir hr("pair_hr");
    std::mt19937_64 rng(43);
    io::save_image((hr.path / "x.png").string(), Tensor::uniform({1, 3, 67, 45}, rng, 0.0f, 1.0f));
    data::DatasetSpec spec;
    spec.hr_dirs = {hr.path.string()};
    spec.scale = 4;
    spec.patch_hr = 16;
    spec.use_cache = false;
    auto scan = data::scan_dataset(spec);
    auto pair = data::load_pair(scan.pairs[0], spec);
    CHECK(pair.hr.h() == 64);
    CHECK(pair.hr.w() == 44);
    CHECK(pair.lr.h() == 16);
    CHECK(pair.lr.w() == 11);
}

TEST_CASE("small images are reflect-padded up to the patch size") {
    TempDir hr("pad_hr");
    std::mt19937_64 rng(47);
    io::save_image((hr.path / "tiny.png").string(),
                   Tensor::uniform({1, 3, 12, 40}, rng, 0.0f, 1.0f));
    data::DatasetSpec spec;
    spec.hr_dirs = {hr.path.string()};
    spec.scale = 4;
    spec.patch_hr = 32;
    spec.use_cache = false;
    auto scan = data::scan_dataset(spec);
    auto pair = data::load_pair(scan.pairs[0], spec);
    CHECK(pair.hr.h() == 32);
    CHECK(pair.hr.w() == 40);
    // reflection: row 12+i mirrors row 10-i
    CHECK(pair.hr.at(0, 0, 13, 5) == pair.hr.at(0, 0, 9, 5));
}

TEST_CASE("LR cache makes repeated loads identical") {
    TempDir hr("cache_hr");
    std::mt19937_64 rng(53);
    io::save_image((hr.path / "img.png").string(),
                   Tensor::uniform({1, 3, 40, 40}, rng, 0.0f, 1.0f));
    data::DatasetSpec spec;
    spec.hr_dirs = {hr.path.string()};
    spec.scale = 4;
    spec.patch_hr = 16;
    auto scan = data::scan_dataset(spec);
    auto first = data::load_pair(scan.pairs[0], spec);
    const fs::path cache_dir = hr.path.string() + "_LRx4";
    CHECK(fs::exists(cache_dir / "img.png"));
    auto second = data::load_pair(scan.pairs[0], spec);
    CHECK(first.lr.data == second.lr.data);
    fs::remove_all(cache_dir);
}

TEST_CASE("sample_patch is scale-aligned and reproducible") {
    data::DatasetSpec spec;
    spec.hr_dirs = {"synth:1:64:3"};
    spec.scale = 4;
    spec.patch_hr = 32;
    auto scan = data::scan_dataset(spec);
    auto pair = data::load_pair(scan.pairs[0], spec);

    std::mt19937_64 r1(123), r2(123);
    auto [lr1, hr1] = data::sample_patch(pair, 32, 4, r1);
    auto [lr2, hr2] = data::sample_patch(pair, 32, 4, r2);
    CHECK(lr1.data == lr2.data);
    CHECK(hr1.data == hr2.data);
    CHECK(lr1.shape == Shape{1, 3, 8, 8});
    CHECK(hr1.shape == Shape{1, 3, 32, 32});
    // every LR pixel of the patch equals the corresponding source pixel
    bool found = false;
    for (int y = 0; y + 8 <= pair.lr.h() && !found; ++y)
        for (int x = 0; x + 8 <= pair.lr.w() && !found; ++x) {
            bool all = true;
            for (int i = 0; i < 8 && all; ++i)
                for (int j = 0; j < 8 && all; ++j)
                    all = lr1.at(0, 0, i, j) == pair.lr.at(0, 0, y + i, x + j);
            found = all;
        }
    CHECK(found);
}

TEST_CASE("augment applies the same dihedral transform to both patches") {
    data::DatasetSpec spec;
    spec.hr_dirs = {"synth:1:64:9"};
    spec.scale = 4;
    spec.patch_hr = 16;
    auto scan = data::scan_dataset(spec);
    auto pair = data::load_pair(scan.pairs[0], spec);
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 8; ++trial) {
        auto [lr, hr] = data::sample_patch(pair, 16, 4, rng);
        Tensor lr0 = lr, hr0 = hr;
        data::augment_pair(lr, hr, rng);
        // downsampling the augmented HR by slicing corners must track LR corners
        CHECK(lr.h() * 4 == hr.h());
        CHECK(lr.w() * 4 == hr.w());
        // the multiset of values is preserved
        auto sorted = [](Tensor t) {
            std::sort(t.data.begin(), t.data.end());
            return t.data;
        };
        CHECK(sorted(lr0) == sorted(lr));
        CHECK(sorted(hr0) == sorted(hr));
    }
}

TEST_CASE("scan rejects an empty result and bad synth specs") {
    TempDir empty("empty_hr");
    data::DatasetSpec spec;
    spec.hr_dirs = {empty.path.string()};
    CHECK_THROWS_AS(data::scan_dataset(spec), TensorError);
    spec.hr_dirs = {"synth:bogus"};
    CHECK_THROWS_AS(data::scan_dataset(spec), TensorError);
}
