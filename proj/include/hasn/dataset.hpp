#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hasn/tensor.hpp"

namespace hasn::data {

struct DatasetSpec {
    std::vector<std::string> hr_dirs;
    std::string lr_dir;  // empty: degrade on the fly (with disk cache)
    int scale = 4;
    int patch_hr = 192;
    bool augment = true;
    bool use_cache = true;

    void validate() const;
};

struct PairDesc {
    std::string hr_path;  // file path, or "synth:<size>:<seed>"
    std::string lr_path;  // empty: generate
    std::string stem;
};

struct ScanResult {
    std::vector<PairDesc> pairs;
    std::vector<std::string> warnings;
};

// Lists image files of all hr_dirs (lexicographic within each dir, dirs in
// the order given) and pairs them with lr_dir entries by stem. Unmatched
// files on either side produce warnings and are dropped. A directory of the
// form "synth:<count>:<size>:<seed>" expands to synthetic images.
ScanResult scan_dataset(const DatasetSpec& spec);

struct ImagePair {
    Tensor hr;  // (1,3,H,W), H and W multiples of scale, >= patch_hr
    Tensor lr;  // (1,3,H/scale,W/scale)
    std::string source;
};

ImagePair load_pair(const PairDesc& desc, const DatasetSpec& spec);

// Smooth random field in [0,1], reproducible from the seed.
Tensor synth_image(int h, int w, unsigned long long seed);

// Uniform scale-aligned crop; returns (lr_patch, hr_patch).
std::pair<Tensor, Tensor> sample_patch(const ImagePair& pair, int patch_hr, int scale,
                                       std::mt19937_64& rng);

// Shared random dihedral transform applied to both patches.
void augment_pair(Tensor& lr, Tensor& hr, std::mt19937_64& rng);

}  // namespace hasn::data
