#pragma once

#include <string>
#include <utility>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace raseg {

// Images are channel-planar float in [0,1]; masks are integer label maps
// (0 = background).
struct ImageF {
    int c = 0, h = 0, w = 0;
    std::vector<float> v;

    ImageF() = default;
    ImageF(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(size_t(c_) * h_ * w_, 0.f) {}
    float& at(int ch, int y, int x) { return v[(size_t(ch) * h + y) * w + x]; }
    float at(int ch, int y, int x) const { return v[(size_t(ch) * h + y) * w + x]; }
};

struct Mask {
    int h = 0, w = 0;
    std::vector<uint8_t> v;

    Mask() = default;
    Mask(int h_, int w_) : h(h_), w(w_), v(size_t(h_) * w_, 0) {}
    uint8_t& at(int y, int x) { return v[size_t(y) * w + x]; }
    uint8_t at(int y, int x) const { return v[size_t(y) * w + x]; }
};

struct Sample {
    ImageF image;
    Mask mask;
    int index = 0;
};

// ---------------------------------------------------------------------------
// synthetic phantoms

struct SyntheticSpec {
    int size = 96;   // H = W, divisible by 32
    int count = 64;  // dataset length
    int n_blobs_min = 1, n_blobs_max = 3;
    std::vector<double> class_probs{0.5, 0.5};  // multiclass: labels 1..K
    int texture_octaves = 4;
    uint64_t seed = 7;
    bool multiclass = false;

    void validate() const;
};

// Fully determined by (spec.seed, index): multi-octave noise background plus
// k tinted elliptical blobs with soft boundaries.
Sample generate_sample(const SyntheticSpec& spec, int index);

// ---------------------------------------------------------------------------
// resizing helpers (image bilinear, mask nearest)

ImageF resize_image(const ImageF& img, int out_h, int out_w);
Mask resize_mask(const Mask& mask, int out_h, int out_w);

// ---------------------------------------------------------------------------
// geometric transforms, applied identically to image and mask

void rotate90(ImageF& img, Mask& mask, int k);  // k quarter turns ccw
void flip(ImageF& img, Mask& mask, bool horizontal, bool vertical);
void transpose(ImageF& img, Mask& mask);
void crop_resize(ImageF& img, Mask& mask, int y0, int x0, int win_h, int win_w, int out_size);

struct AffineParams {
    double rot_deg = 0;
    double shear = 0;   // shear coefficient (tangent)
    double zoom = 1;    // isotropic scale of the content
    double shift_x = 0, shift_y = 0;  // pixels
    bool hflip = false, vflip = false;
};

// Inverse-mapped affine: bilinear for the image, nearest for the mask,
// constant 0 fill outside.
void affine(ImageF& img, Mask& mask, const AffineParams& p);

// ---------------------------------------------------------------------------
// photometric transforms (image only)

void hsv_jitter(ImageF& img, double dh, double ds, double dv);
void brightness_contrast(ImageF& img, double brightness, double contrast);
void gaussian_blur(ImageF& img, double sigma);
void box_blur(ImageF& img, int k);
void median_blur(ImageF& img, int k);
void motion_blur(ImageF& img, int k, double angle_deg);
void sharpen(ImageF& img, double alpha, double lightness);
void add_gaussian_noise(ImageF& img, double stddev, bool per_channel, Rng& rng);
void channel_add(ImageF& img, double delta, bool per_channel, Rng& rng);
void channel_multiply(ImageF& img, double low, double high, bool per_channel, Rng& rng);
void adjust_contrast(ImageF& img, double factor);

// ---------------------------------------------------------------------------
// augmentation pipelines

struct AppliedOps {
    bool sequence_applied = false;
    std::vector<std::string> ops;

    bool has(const std::string& name) const;
};

struct BinaryAugConfig {
    int out_size = 96;
    double p_apply = 0.5;  // master gate over the whole sequence
    double p_rot90 = 0.5, p_flip = 0.5, p_hsv = 0.5, p_brightness_contrast = 0.5,
           p_blur = 0.5, p_transpose = 0.5, p_crop = 0.2;
    double crop_frac = 224.0 / 384.0;  // window as a fraction of the input size
    double hue_delta = 0.02, sat_delta = 0.1, val_delta = 0.1;
    double brightness_delta = 0.1, contrast_delta = 0.1;
    double blur_sigma_min = 0.1, blur_sigma_max = 1.5;
};

AppliedOps augment_binary(Sample& s, const BinaryAugConfig& cfg, Rng& rng);

struct MulticlassAugConfig {
    int out_size = 96;
    double p_affine = 0.5, p_photometric = 0.5;
    int photometric_min = 0, photometric_max = 3;  // SomeOf count
    double shear_range = 0.1, zoom_range = 0.2, shift_range = 0.25, rotation_range = 180;
};

AppliedOps augment_multiclass(Sample& s, const MulticlassAugConfig& cfg, Rng& rng);

// ---------------------------------------------------------------------------
// splits

// Deterministic shuffled holdout: first ceil(train_frac*count) to train.
std::pair<std::vector<int>, std::vector<int>> make_holdout(int count, double train_frac,
                                                           uint64_t seed);
std::vector<std::vector<int>> make_kfold(int count, int k, uint64_t seed);

// ---------------------------------------------------------------------------
// disk cache: one directory per split, raw-float images, label-png masks,
// json manifest

void write_split_dir(const std::string& dir, const SyntheticSpec& spec,
                     const std::vector<int>& indices, const std::string& split_name);

struct CachedDataset {
    std::vector<Sample> samples;
    std::vector<std::string> ids;
    bool multiclass = false;
    int size = 0;
    uint64_t spec_hash = 0;
};

CachedDataset load_split_dir(const std::string& dir);

void write_image_file(const std::string& path, const ImageF& img);
ImageF read_image_file(const std::string& path);

// ---------------------------------------------------------------------------
// tensor bridging

template <class S>
TensorT<S> images_to_tensor(const std::vector<ImageF>& images);

template <class S>
TensorT<S> masks_to_binary_tensor(const std::vector<Mask>& masks);

std::vector<int> masks_to_labels(const std::vector<Mask>& masks);

}  // namespace raseg
