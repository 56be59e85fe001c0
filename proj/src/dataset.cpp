#include "hasn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "hasn/bicubic.hpp"
#include "hasn/image_io.hpp"
#include "hasn/kernels.hpp"

namespace fs = std::filesystem;

namespace hasn::data {

namespace {

bool is_image_file(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    return ext == ".png" || ext == ".ppm" || ext == ".pgm";
}

struct SynthDir {
    int count;
    int size;
    unsigned long long seed;
};

bool parse_synth(const std::string& dir, SynthDir& out) {
    if (dir.rfind("synth:", 0) != 0) return false;
    unsigned long long c = 0, s = 0, seed = 0;
    if (std::sscanf(dir.c_str(), "synth:%llu:%llu:%llu", &c, &s, &seed) != 3)
        throw TensorError("bad synthetic dataset spec: " + dir +
                          " (expected synth:<count>:<size>:<seed>)");
    out.count = int(c);
    out.size = int(s);
    out.seed = seed;
    require(out.count > 0 && out.size >= 8, "synthetic dataset needs count > 0, size >= 8");
    return true;
}

Tensor crop_to_multiple(const Tensor& img, int scale) {
    const int h = img.h() / scale * scale;
    const int w = img.w() / scale * scale;
    require(h > 0 && w > 0, "image smaller than one scale step");
    if (h == img.h() && w == img.w()) return img;
    Tensor out(img.n(), img.c(), h, w);
    for (int n = 0; n < img.n(); ++n)
        for (int c = 0; c < img.c(); ++c)
            for (int y = 0; y < h; ++y)
                std::copy_n(img.plane(n, c) + size_t(y) * img.w(), w,
                            out.plane(n, c) + size_t(y) * w);
    return out;
}

int reflect_index(int i, int n) {
    // reflect without edge repetition: -1 -> 1, n -> n-2
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i = ((i % period) + period) % period;
    return i < n ? i : period - i;
}

Tensor reflect_pad_to(const Tensor& img, int out_h, int out_w) {
    if (img.h() >= out_h && img.w() >= out_w) return img;
    const int h = std::max(img.h(), out_h);
    const int w = std::max(img.w(), out_w);
    Tensor out(img.n(), img.c(), h, w);
    for (int n = 0; n < img.n(); ++n)
        for (int c = 0; c < img.c(); ++c) {
            const float* src = img.plane(n, c);
            float* dst = out.plane(n, c);
            for (int y = 0; y < h; ++y) {
                const int sy = reflect_index(y, img.h());
                for (int x = 0; x < w; ++x)
                    dst[size_t(y) * w + x] = src[size_t(sy) * img.w() + reflect_index(x, img.w())];
            }
        }
    return out;
}

// Degraded LR copies are cached next to the HR directory so repeated runs
// see identical (8-bit quantized) inputs.
std::string cache_path_for(const std::string& hr_path, int scale) {
    fs::path p(hr_path);
    fs::path dir = p.parent_path();
    fs::path cache_dir = dir.string() + "_LRx" + std::to_string(scale);
    return (cache_dir / (p.stem().string() + ".png")).string();
}

}  // namespace

void DatasetSpec::validate() const {
    require(!hr_dirs.empty(), "dataset: no hr_dir given");
    require(scale >= 1, "dataset: scale must be >= 1");
    require(patch_hr >= scale, "dataset: patch_hr must be >= scale");
    require(patch_hr % scale == 0, "dataset: patch_hr must be a multiple of scale");
}

ScanResult scan_dataset(const DatasetSpec& spec) {
    spec.validate();
    ScanResult res;
    std::vector<std::pair<std::string, std::string>> lr_by_stem;  // stem -> path
    if (!spec.lr_dir.empty()) {
        require(fs::is_directory(spec.lr_dir), "lr_dir does not exist: " + spec.lr_dir);
        for (const auto& e : fs::directory_iterator(spec.lr_dir))
            if (e.is_regular_file() && is_image_file(e.path()))
                lr_by_stem.emplace_back(e.path().stem().string(), e.path().string());
        std::sort(lr_by_stem.begin(), lr_by_stem.end());
    }
    std::vector<bool> lr_used(lr_by_stem.size(), false);

    for (const auto& dir : spec.hr_dirs) {
        SynthDir sd;
        if (parse_synth(dir, sd)) {
            for (int i = 0; i < sd.count; ++i) {
                PairDesc d;
                char stem[32];
                std::snprintf(stem, sizeof stem, "synth_%04d", i);
                d.stem = stem;
                d.hr_path = "synth:" + std::to_string(sd.size) + ":" +
                            std::to_string(sd.seed + (unsigned long long)i);
                res.pairs.push_back(std::move(d));
            }
            continue;
        }
        require(fs::is_directory(dir), "hr_dir does not exist: " + dir);
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& p : files) {
            PairDesc d;
            d.hr_path = p.string();
            d.stem = p.stem().string();
            if (!lr_by_stem.empty()) {
                auto it = std::lower_bound(lr_by_stem.begin(), lr_by_stem.end(),
                                           std::make_pair(d.stem, std::string()));
                if (it == lr_by_stem.end() || it->first != d.stem) {
                    res.warnings.push_back("no LR match for " + d.hr_path + ", skipping");
                    continue;
                }
                d.lr_path = it->second;
                lr_used[size_t(it - lr_by_stem.begin())] = true;
            }
            res.pairs.push_back(std::move(d));
        }
    }
    for (size_t i = 0; i < lr_by_stem.size(); ++i)
        if (!lr_used[i])
            res.warnings.push_back("no HR match for " + lr_by_stem[i].second + ", skipping");
    require(!res.pairs.empty(), "dataset scan found no usable image pairs");
    return res;
}

Tensor synth_image(int h, int w, unsigned long long seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> uni(0.0f, 1.0f);
    const int ch = std::max(2, h / 8);
    const int cw = std::max(2, w / 8);
    Tensor coarse(1, 3, ch, cw);
    for (auto& v : coarse.data) v = uni(rng);
    const int fh = std::max(2, h / 2);
    const int fw = std::max(2, w / 2);
    Tensor fine(1, 3, fh, fw);
    for (auto& v : fine.data) v = uni(rng);
    Tensor base = kernels::resize_bilinear(coarse, h, w);
    Tensor detail = kernels::resize_bilinear(fine, h, w);
    for (size_t i = 0; i < base.data.size(); ++i) {
        float v = 0.8f * base.data[i] + 0.2f * detail.data[i];
        base.data[i] = std::clamp(v, 0.0f, 1.0f);
    }
    return base;
}

ImagePair load_pair(const PairDesc& desc, const DatasetSpec& spec) {
    ImagePair pair;
    pair.source = desc.hr_path;

    unsigned long long synth_size = 0, synth_seed = 0;
    if (std::sscanf(desc.hr_path.c_str(), "synth:%llu:%llu", &synth_size, &synth_seed) == 2) {
        const int side = std::max(int(synth_size) / spec.scale * spec.scale, spec.patch_hr);
        pair.hr = synth_image(side, side, synth_seed);
        pair.lr = bicubic_resize(pair.hr, 1.0 / spec.scale);
        return pair;
    }

    Tensor hr = crop_to_multiple(io::load_image(desc.hr_path), spec.scale);
    hr = reflect_pad_to(hr, spec.patch_hr, spec.patch_hr);
    pair.hr = std::move(hr);
    const int lh = pair.hr.h() / spec.scale;
    const int lw = pair.hr.w() / spec.scale;

    if (!desc.lr_path.empty()) {
        pair.lr = io::load_image(desc.lr_path);
        require(pair.lr.h() == lh && pair.lr.w() == lw,
                "LR/HR size mismatch for " + desc.lr_path);
        return pair;
    }

    const std::string cache = cache_path_for(desc.hr_path, spec.scale);
    if (spec.use_cache && fs::exists(cache)) {
        Tensor lr = io::load_image(cache);
        if (lr.h() == lh && lr.w() == lw) {
            pair.lr = std::move(lr);
            return pair;
        }
    }
    Tensor lr = bicubic_resize(pair.hr, 1.0 / spec.scale);
    if (spec.use_cache) {
        std::error_code ec;
        fs::create_directories(fs::path(cache).parent_path(), ec);
        if (!ec) {
            try {
                io::save_image(cache, lr);
                pair.lr = io::load_image(cache);
                return pair;
            } catch (const io::ImageError&) {
            }
        }
    }
    pair.lr = std::move(lr);
    return pair;
}

std::pair<Tensor, Tensor> sample_patch(const ImagePair& pair, int patch_hr, int scale,
                                       std::mt19937_64& rng) {
    require(patch_hr % scale == 0, "patch_hr must be a multiple of scale");
    const int p = patch_hr / scale;
    require(pair.lr.h() >= p && pair.lr.w() >= p,
            "image too small for patch: " + pair.source);
    std::uniform_int_distribution<int> dy(0, pair.lr.h() - p);
    std::uniform_int_distribution<int> dx(0, pair.lr.w() - p);
    const int y0 = dy(rng);
    const int x0 = dx(rng);

    Tensor lr(1, 3, p, p);
    Tensor hr(1, 3, patch_hr, patch_hr);
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < p; ++y)
            std::copy_n(pair.lr.plane(0, c) + size_t(y0 + y) * pair.lr.w() + x0, p,
                        lr.plane(0, c) + size_t(y) * p);
        for (int y = 0; y < patch_hr; ++y)
            std::copy_n(pair.hr.plane(0, c) + size_t(y0 * scale + y) * pair.hr.w() + x0 * scale,
                        patch_hr, hr.plane(0, c) + size_t(y) * patch_hr);
    }
    return {std::move(lr), std::move(hr)};
}

void augment_pair(Tensor& lr, Tensor& hr, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> rot(0, 3);
    std::uniform_int_distribution<int> flip(0, 1);
    const int k = rot(rng);
    const bool f = flip(rng) == 1;
    for (int i = 0; i < k; ++i) {
        lr = kernels::rot90(lr);
        hr = kernels::rot90(hr);
    }
    if (f) {
        lr = kernels::flip_h(lr);
        hr = kernels::flip_h(hr);
    }
}

}  // namespace hasn::data
