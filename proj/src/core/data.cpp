#include "core/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "core/config.hpp"
#include "core/hashing.hpp"
#include "core/png_io.hpp"

namespace raseg {

namespace fs = std::filesystem;
using detail::check;

// ---------------------------------------------------------------------------
// synthetic phantoms

void SyntheticSpec::validate() const {
    check(size >= 32 && size % 32 == 0, "synthetic spec: size must be a positive multiple of 32");
    check(count >= 0, "synthetic spec: count must be >= 0");
    check(n_blobs_min >= 0 && n_blobs_max >= n_blobs_min, "synthetic spec: bad blob range");
    check(texture_octaves >= 1, "synthetic spec: texture_octaves must be >= 1");
    if (multiclass) {
        check(class_probs.size() >= 2, "synthetic spec: multiclass needs >= 2 class probs");
        double total = 0;
        for (const double p : class_probs) {
            check(p >= 0, "synthetic spec: negative class prob");
            total += p;
        }
        check(total > 0, "synthetic spec: class probs sum to zero");
    }
}

namespace {

// single octave of bilinear value noise over a (cells+1)^2 grid
void add_noise_octave(std::vector<float>& out, int size, int cells, double amp, Rng& rng) {
    std::vector<double> grid(size_t(cells + 1) * (cells + 1));
    for (auto& g : grid) g = rng.uniform();
    const double scale = double(cells) / size;
    for (int y = 0; y < size; ++y) {
        const double gy = y * scale;
        const int y0 = std::min(int(gy), cells - 1);
        const double fy = gy - y0;
        for (int x = 0; x < size; ++x) {
            const double gx = x * scale;
            const int x0 = std::min(int(gx), cells - 1);
            const double fx = gx - x0;
            const double v00 = grid[size_t(y0) * (cells + 1) + x0];
            const double v01 = grid[size_t(y0) * (cells + 1) + x0 + 1];
            const double v10 = grid[size_t(y0 + 1) * (cells + 1) + x0];
            const double v11 = grid[size_t(y0 + 1) * (cells + 1) + x0 + 1];
            const double top = v00 + fx * (v01 - v00);
            const double bot = v10 + fx * (v11 - v10);
            out[size_t(y) * size + x] += float(amp * (top + fy * (bot - top)));
        }
    }
}

int sample_class(const std::vector<double>& probs, Rng& rng) {
    double total = 0;
    for (const double p : probs) total += p;
    double u = rng.uniform() * total;
    for (size_t i = 0; i < probs.size(); ++i) {
        u -= probs[i];
        if (u < 0) return int(i) + 1;
    }
    return int(probs.size());
}

}  // namespace

Sample generate_sample(const SyntheticSpec& spec, int index) {
    spec.validate();
    Rng rng = Rng::child(spec.seed, uint64_t(index));
    const int size = spec.size;

    // background: accumulated value noise, normalized to a mid-grey band
    std::vector<float> lum(size_t(size) * size, 0.f);
    double amp_total = 0;
    for (int o = 0; o < spec.texture_octaves; ++o) {
        const double amp = std::pow(0.55, o);
        add_noise_octave(lum, size, 4 << o, amp, rng);
        amp_total += amp;
    }
    Sample s;
    s.index = index;
    s.image = ImageF(3, size, size);
    s.mask = Mask(size, size);
    const float tint_r = float(rng.uniform(-0.04, 0.04));
    const float tint_b = float(rng.uniform(-0.04, 0.04));
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const float base = 0.25f + 0.5f * lum[size_t(y) * size + x] / float(amp_total);
            s.image.at(0, y, x) = base + tint_r;
            s.image.at(1, y, x) = base;
            s.image.at(2, y, x) = base + tint_b;
        }

    // elliptical blobs with class-dependent tint and a soft intensity band
    const int k = spec.n_blobs_max == spec.n_blobs_min
                      ? spec.n_blobs_min
                      : rng.uniform_int(spec.n_blobs_min, spec.n_blobs_max);
    for (int blob = 0; blob < k; ++blob) {
        const int label = spec.multiclass ? sample_class(spec.class_probs, rng) : 1;
        const double cx = rng.uniform(0.18, 0.82) * size;
        const double cy = rng.uniform(0.18, 0.82) * size;
        const double a = std::max(2.0, rng.uniform(0.08, 0.20) * size);
        const double b = std::max(2.0, rng.uniform(0.08, 0.20) * size);
        const double theta = rng.uniform(0.0, 3.14159265358979323846);
        const double strength = rng.uniform(0.18, 0.38);
        // label 1 warm, label 2 cool; binary blobs are warm
        const double tint[3] = {label == 2 ? -0.4 : 1.0, label == 2 ? 0.15 : 0.35,
                                label == 2 ? 1.0 : -0.25};
        const double ct = std::cos(theta), st = std::sin(theta);

        const int y_lo = std::max(0, int(cy - std::max(a, b) * 1.4));
        const int y_hi = std::min(size - 1, int(cy + std::max(a, b) * 1.4));
        const int x_lo = std::max(0, int(cx - std::max(a, b) * 1.4));
        const int x_hi = std::min(size - 1, int(cx + std::max(a, b) * 1.4));
        for (int y = y_lo; y <= y_hi; ++y)
            for (int x = x_lo; x <= x_hi; ++x) {
                const double dx = x - cx, dy = y - cy;
                const double u = (dx * ct + dy * st) / a;
                const double v = (-dx * st + dy * ct) / b;
                const double d = std::sqrt(u * u + v * v);
                if (d <= 1.0) s.mask.at(y, x) = uint8_t(label);
                const double t = std::clamp((1.15 - d) / 0.3, 0.0, 1.0);
                const double soft = t * t * (3.0 - 2.0 * t);
                if (soft > 0)
                    for (int c = 0; c < 3; ++c)
                        s.image.at(c, y, x) += float(strength * tint[c] * soft);
            }
    }
    for (auto& v : s.image.v) v = std::clamp(v, 0.f, 1.f);
    return s;
}

// ---------------------------------------------------------------------------
// resizing

namespace {

struct AxisMap {
    std::vector<int> i0, i1;
    std::vector<float> frac;
};

AxisMap axis_map(int in, int out) {
    AxisMap a;
    a.i0.resize(size_t(out));
    a.i1.resize(size_t(out));
    a.frac.resize(size_t(out));
    const double scale = double(in) / out;
    for (int o = 0; o < out; ++o) {
        double src = (o + 0.5) * scale - 0.5;
        src = std::clamp(src, 0.0, double(in - 1));
        const int lo = int(std::floor(src));
        a.i0[size_t(o)] = lo;
        a.i1[size_t(o)] = std::min(lo + 1, in - 1);
        a.frac[size_t(o)] = float(src - lo);
    }
    return a;
}

}  // namespace

ImageF resize_image(const ImageF& img, int out_h, int out_w) {
    if (img.h == out_h && img.w == out_w) return img;
    const AxisMap ay = axis_map(img.h, out_h), ax = axis_map(img.w, out_w);
    ImageF out(img.c, out_h, out_w);
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < out_h; ++y) {
            const float fy = ay.frac[size_t(y)];
            for (int x = 0; x < out_w; ++x) {
                const float fx = ax.frac[size_t(x)];
                const float v00 = img.at(c, ay.i0[size_t(y)], ax.i0[size_t(x)]);
                const float v01 = img.at(c, ay.i0[size_t(y)], ax.i1[size_t(x)]);
                const float v10 = img.at(c, ay.i1[size_t(y)], ax.i0[size_t(x)]);
                const float v11 = img.at(c, ay.i1[size_t(y)], ax.i1[size_t(x)]);
                const float top = v00 + fx * (v01 - v00);
                const float bot = v10 + fx * (v11 - v10);
                out.at(c, y, x) = top + fy * (bot - top);
            }
        }
    return out;
}

Mask resize_mask(const Mask& mask, int out_h, int out_w) {
    if (mask.h == out_h && mask.w == out_w) return mask;
    Mask out(out_h, out_w);
    for (int y = 0; y < out_h; ++y) {
        const int sy = std::clamp(int((y + 0.5) * mask.h / double(out_h)), 0, mask.h - 1);
        for (int x = 0; x < out_w; ++x) {
            const int sx = std::clamp(int((x + 0.5) * mask.w / double(out_w)), 0, mask.w - 1);
            out.at(y, x) = mask.at(sy, sx);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// geometric transforms

namespace {

template <class Getter, class Setter>
void remap(int in_h, int in_w, int out_h, int out_w, Getter get, Setter set) {
    (void)in_h;
    (void)in_w;
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) set(y, x, get(y, x));
}

}  // namespace

void rotate90(ImageF& img, Mask& mask, int k) {
    k = ((k % 4) + 4) % 4;
    for (int step = 0; step < k; ++step) {
        // one quarter turn ccw: out(y,x) = in(x, W-1-y), out dims (W,H)
        ImageF out(img.c, img.w, img.h);
        for (int c = 0; c < img.c; ++c)
            remap(img.h, img.w, out.h, out.w,
                  [&](int y, int x) { return img.at(c, x, img.w - 1 - y); },
                  [&](int y, int x, float v) { out.at(c, y, x) = v; });
        img = std::move(out);
        Mask mout(mask.w, mask.h);
        remap(mask.h, mask.w, mout.h, mout.w,
              [&](int y, int x) { return mask.at(x, mask.w - 1 - y); },
              [&](int y, int x, uint8_t v) { mout.at(y, x) = v; });
        mask = std::move(mout);
    }
}

void flip(ImageF& img, Mask& mask, bool horizontal, bool vertical) {
    if (!horizontal && !vertical) return;
    ImageF out(img.c, img.h, img.w);
    for (int c = 0; c < img.c; ++c)
        remap(img.h, img.w, img.h, img.w,
              [&](int y, int x) {
                  return img.at(c, vertical ? img.h - 1 - y : y,
                                horizontal ? img.w - 1 - x : x);
              },
              [&](int y, int x, float v) { out.at(c, y, x) = v; });
    img = std::move(out);
    Mask mout(mask.h, mask.w);
    remap(mask.h, mask.w, mask.h, mask.w,
          [&](int y, int x) {
              return mask.at(vertical ? mask.h - 1 - y : y, horizontal ? mask.w - 1 - x : x);
          },
          [&](int y, int x, uint8_t v) { mout.at(y, x) = v; });
    mask = std::move(mout);
}

void transpose(ImageF& img, Mask& mask) {
    ImageF out(img.c, img.w, img.h);
    for (int c = 0; c < img.c; ++c)
        remap(img.h, img.w, out.h, out.w, [&](int y, int x) { return img.at(c, x, y); },
              [&](int y, int x, float v) { out.at(c, y, x) = v; });
    img = std::move(out);
    Mask mout(mask.w, mask.h);
    remap(mask.h, mask.w, mout.h, mout.w, [&](int y, int x) { return mask.at(x, y); },
          [&](int y, int x, uint8_t v) { mout.at(y, x) = v; });
    mask = std::move(mout);
}

void crop_resize(ImageF& img, Mask& mask, int y0, int x0, int win_h, int win_w, int out_size) {
    check(y0 >= 0 && x0 >= 0 && y0 + win_h <= img.h && x0 + win_w <= img.w,
          "crop_resize: window out of bounds");
    ImageF cropped(img.c, win_h, win_w);
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < win_h; ++y)
            for (int x = 0; x < win_w; ++x) cropped.at(c, y, x) = img.at(c, y0 + y, x0 + x);
    Mask mcropped(win_h, win_w);
    for (int y = 0; y < win_h; ++y)
        for (int x = 0; x < win_w; ++x) mcropped.at(y, x) = mask.at(y0 + y, x0 + x);
    img = resize_image(cropped, out_size, out_size);
    mask = resize_mask(mcropped, out_size, out_size);
}

void affine(ImageF& img, Mask& mask, const AffineParams& p) {
    check(p.zoom > 0, "affine: zoom must be positive");
    const double rad = p.rot_deg * 3.14159265358979323846 / 180.0;
    const double ct = std::cos(rad), st = std::sin(rad);
    // A = R * Shear * Scale(zoom, flips)
    const double zx = p.zoom * (p.hflip ? -1.0 : 1.0);
    const double zy = p.zoom * (p.vflip ? -1.0 : 1.0);
    // Shear*Scale = [[zx, shear*zy],[0, zy]]
    const double m00 = ct * zx, m01 = ct * p.shear * zy - st * zy;
    const double m10 = st * zx, m11 = st * p.shear * zy + ct * zy;
    const double det = m00 * m11 - m01 * m10;
    check(std::abs(det) > 1e-12, "affine: singular transform");
    const double i00 = m11 / det, i01 = -m01 / det;
    const double i10 = -m10 / det, i11 = m00 / det;
    const double cx = (img.w - 1) / 2.0, cy = (img.h - 1) / 2.0;

    ImageF out(img.c, img.h, img.w);
    Mask mout(mask.h, mask.w);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            const double rx = x - cx - p.shift_x;
            const double ry = y - cy - p.shift_y;
            const double sx = i00 * rx + i01 * ry + cx;
            const double sy = i10 * rx + i11 * ry + cy;
            // image: bilinear, out-of-bounds taps contribute 0
            const int x0 = int(std::floor(sx)), y0 = int(std::floor(sy));
            const double fx = sx - x0, fy = sy - y0;
            for (int c = 0; c < img.c; ++c) {
                auto tap = [&](int yy, int xx) -> double {
                    if (yy < 0 || yy >= img.h || xx < 0 || xx >= img.w) return 0.0;
                    return img.at(c, yy, xx);
                };
                const double top = tap(y0, x0) * (1 - fx) + tap(y0, x0 + 1) * fx;
                const double bot = tap(y0 + 1, x0) * (1 - fx) + tap(y0 + 1, x0 + 1) * fx;
                out.at(c, y, x) = float(top * (1 - fy) + bot * fy);
            }
            // mask: nearest, constant fill 0
            const int nx = int(std::lround(sx)), ny = int(std::lround(sy));
            mout.at(y, x) =
                (ny >= 0 && ny < mask.h && nx >= 0 && nx < mask.w) ? mask.at(ny, nx) : 0;
        }
    img = std::move(out);
    mask = std::move(mout);
}

// ---------------------------------------------------------------------------
// photometric transforms

namespace {

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
    const float mx = std::max({r, g, b}), mn = std::min({r, g, b});
    v = mx;
    const float d = mx - mn;
    s = mx == 0 ? 0 : d / mx;
    if (d == 0) {
        h = 0;
    } else if (mx == r) {
        h = (g - b) / d / 6.f;
    } else if (mx == g) {
        h = (2.f + (b - r) / d) / 6.f;
    } else {
        h = (4.f + (r - g) / d) / 6.f;
    }
    if (h < 0) h += 1.f;
}

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
    const float hh = (h - std::floor(h)) * 6.f;
    const int i = int(hh);
    const float f = hh - i;
    const float p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (i % 6) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
}

// separable convolution with replicate borders
void separable_filter(ImageF& img, const std::vector<float>& kernel, int offset) {
    const int k = int(kernel.size());
    ImageF tmp(img.c, img.h, img.w);
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                float acc = 0;
                for (int i = 0; i < k; ++i) {
                    const int xx = std::clamp(x + i + offset, 0, img.w - 1);
                    acc += kernel[size_t(i)] * img.at(c, y, xx);
                }
                tmp.at(c, y, x) = acc;
            }
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                float acc = 0;
                for (int i = 0; i < k; ++i) {
                    const int yy = std::clamp(y + i + offset, 0, img.h - 1);
                    acc += kernel[size_t(i)] * tmp.at(c, yy, x);
                }
                img.at(c, y, x) = acc;
            }
}

}  // namespace

void hsv_jitter(ImageF& img, double dh, double ds, double dv) {
    check(img.c == 3, "hsv_jitter: rgb image required");
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            float h, s, v;
            rgb_to_hsv(img.at(0, y, x), img.at(1, y, x), img.at(2, y, x), h, s, v);
            h = float(h + dh);
            h -= std::floor(h);
            s = std::clamp(float(s + ds), 0.f, 1.f);
            v = std::clamp(float(v + dv), 0.f, 1.f);
            float r, g, b;
            hsv_to_rgb(h, s, v, r, g, b);
            img.at(0, y, x) = r;
            img.at(1, y, x) = g;
            img.at(2, y, x) = b;
        }
}

void brightness_contrast(ImageF& img, double brightness, double contrast) {
    for (auto& v : img.v)
        v = std::clamp(float((v - 0.5) * (1.0 + contrast) + 0.5 + brightness), 0.f, 1.f);
}

void gaussian_blur(ImageF& img, double sigma) {
    check(sigma > 0, "gaussian_blur: sigma must be positive");
    const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
    std::vector<float> kernel(size_t(2 * radius + 1));
    double total = 0;
    for (int i = -radius; i <= radius; ++i) {
        const double w = std::exp(-0.5 * i * i / (sigma * sigma));
        kernel[size_t(i + radius)] = float(w);
        total += w;
    }
    for (auto& w : kernel) w = float(w / total);
    separable_filter(img, kernel, -radius);
}

void box_blur(ImageF& img, int k) {
    check(k >= 2, "box_blur: kernel must be >= 2");
    std::vector<float> kernel(size_t(k), 1.f / float(k));
    separable_filter(img, kernel, -((k - 1) / 2));
}

void median_blur(ImageF& img, int k) {
    check(k >= 3 && k % 2 == 1, "median_blur: kernel must be odd and >= 3");
    const int r = k / 2;
    ImageF out(img.c, img.h, img.w);
    std::vector<float> window;
    window.reserve(size_t(k) * k);
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                window.clear();
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx)
                        window.push_back(img.at(c, std::clamp(y + dy, 0, img.h - 1),
                                                std::clamp(x + dx, 0, img.w - 1)));
                std::nth_element(window.begin(), window.begin() + long(window.size() / 2),
                                 window.end());
                out.at(c, y, x) = window[window.size() / 2];
            }
    img = std::move(out);
}

void motion_blur(ImageF& img, int k, double angle_deg) {
    check(k >= 3, "motion_blur: kernel must be >= 3");
    const double rad = angle_deg * 3.14159265358979323846 / 180.0;
    const double dx = std::cos(rad), dy = std::sin(rad);
    ImageF out(img.c, img.h, img.w);
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                float acc = 0;
                for (int t = -(k - 1) / 2; t <= k / 2; ++t) {
                    const int xx = std::clamp(x + int(std::lround(t * dx)), 0, img.w - 1);
                    const int yy = std::clamp(y + int(std::lround(t * dy)), 0, img.h - 1);
                    acc += img.at(c, yy, xx);
                }
                out.at(c, y, x) = acc / float(k);
            }
    img = std::move(out);
}

void sharpen(ImageF& img, double alpha, double lightness) {
    ImageF out(img.c, img.h, img.w);
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) {
                double neighbors = 0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dy == 0 && dx == 0) continue;
                        neighbors += img.at(c, std::clamp(y + dy, 0, img.h - 1),
                                            std::clamp(x + dx, 0, img.w - 1));
                    }
                const double v = img.at(c, y, x);
                const double effect = (8.0 + lightness) * v - neighbors;
                out.at(c, y, x) = std::clamp(float((1.0 - alpha) * v + alpha * effect), 0.f, 1.f);
            }
    img = std::move(out);
}

void add_gaussian_noise(ImageF& img, double stddev, bool per_channel, Rng& rng) {
    if (stddev <= 0) return;
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            if (per_channel) {
                for (int c = 0; c < img.c; ++c)
                    img.at(c, y, x) =
                        std::clamp(img.at(c, y, x) + float(rng.normal() * stddev), 0.f, 1.f);
            } else {
                const float n = float(rng.normal() * stddev);
                for (int c = 0; c < img.c; ++c)
                    img.at(c, y, x) = std::clamp(img.at(c, y, x) + n, 0.f, 1.f);
            }
        }
}

void channel_add(ImageF& img, double delta, bool per_channel, Rng& rng) {
    for (int c = 0; c < img.c; ++c) {
        const float d = per_channel ? float(rng.uniform(-delta, delta)) : float(delta);
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x)
                img.at(c, y, x) = std::clamp(img.at(c, y, x) + d, 0.f, 1.f);
    }
}

void channel_multiply(ImageF& img, double low, double high, bool per_channel, Rng& rng) {
    const float shared = float(rng.uniform(low, high));
    for (int c = 0; c < img.c; ++c) {
        const float f = per_channel ? float(rng.uniform(low, high)) : shared;
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x)
                img.at(c, y, x) = std::clamp(img.at(c, y, x) * f, 0.f, 1.f);
    }
}

void adjust_contrast(ImageF& img, double factor) {
    for (auto& v : img.v) v = std::clamp(float((v - 0.5) * factor + 0.5), 0.f, 1.f);
}

// ---------------------------------------------------------------------------
// pipelines

bool AppliedOps::has(const std::string& name) const {
    return std::find(ops.begin(), ops.end(), name) != ops.end();
}

AppliedOps augment_binary(Sample& s, const BinaryAugConfig& cfg, Rng& rng) {
    AppliedOps applied;
    if (!rng.bernoulli(cfg.p_apply)) {
        if (s.image.h != cfg.out_size || s.image.w != cfg.out_size) {
            s.image = resize_image(s.image, cfg.out_size, cfg.out_size);
            s.mask = resize_mask(s.mask, cfg.out_size, cfg.out_size);
        }
        return applied;
    }
    applied.sequence_applied = true;

    if (rng.bernoulli(cfg.p_rot90)) {
        rotate90(s.image, s.mask, rng.uniform_int(1, 3));
        applied.ops.push_back("rotate90");
    }
    if (rng.bernoulli(cfg.p_flip)) {
        const int mode = rng.uniform_int(0, 2);  // horizontal, vertical, both
        flip(s.image, s.mask, mode != 1, mode != 0);
        applied.ops.push_back("flip");
    }
    if (rng.bernoulli(cfg.p_hsv)) {
        hsv_jitter(s.image, rng.uniform(-cfg.hue_delta, cfg.hue_delta),
                   rng.uniform(-cfg.sat_delta, cfg.sat_delta),
                   rng.uniform(-cfg.val_delta, cfg.val_delta));
        applied.ops.push_back("hsv");
    }
    if (rng.bernoulli(cfg.p_brightness_contrast)) {
        brightness_contrast(s.image, rng.uniform(-cfg.brightness_delta, cfg.brightness_delta),
                            rng.uniform(-cfg.contrast_delta, cfg.contrast_delta));
        applied.ops.push_back("brightness_contrast");
    }
    if (rng.bernoulli(cfg.p_blur)) {
        gaussian_blur(s.image, rng.uniform(cfg.blur_sigma_min, cfg.blur_sigma_max));
        applied.ops.push_back("gaussian_blur");
    }
    if (rng.bernoulli(cfg.p_transpose)) {
        transpose(s.image, s.mask);
        applied.ops.push_back("transpose");
    }
    if (rng.bernoulli(cfg.p_crop)) {
        const int win = std::max(8, int(std::lround(cfg.crop_frac * s.image.h)));
        if (win < s.image.h) {
            int y0, x0;
            if (rng.bernoulli(0.5)) {  // random crop
                y0 = rng.uniform_int(0, s.image.h - win);
                x0 = rng.uniform_int(0, s.image.w - win);
            } else {  // center crop
                y0 = (s.image.h - win) / 2;
                x0 = (s.image.w - win) / 2;
            }
            crop_resize(s.image, s.mask, y0, x0, win, win, cfg.out_size);
        }
        applied.ops.push_back("crop");
    }
    if (s.image.h != cfg.out_size || s.image.w != cfg.out_size) {
        s.image = resize_image(s.image, cfg.out_size, cfg.out_size);
        s.mask = resize_mask(s.mask, cfg.out_size, cfg.out_size);
    }
    return applied;
}

AppliedOps augment_multiclass(Sample& s, const MulticlassAugConfig& cfg, Rng& rng) {
    AppliedOps applied;
    if (rng.bernoulli(cfg.p_affine)) {
        AffineParams p;
        p.rot_deg = rng.uniform(-cfg.rotation_range, cfg.rotation_range);
        p.shear = rng.uniform(-cfg.shear_range, cfg.shear_range);
        p.zoom = rng.uniform(1.0 - cfg.zoom_range, 1.0 + cfg.zoom_range);
        p.shift_x = rng.uniform(-cfg.shift_range, cfg.shift_range) * s.image.w;
        p.shift_y = rng.uniform(-cfg.shift_range, cfg.shift_range) * s.image.h;
        p.hflip = rng.bernoulli(0.5);
        p.vflip = rng.bernoulli(0.5);
        affine(s.image, s.mask, p);
        applied.sequence_applied = true;
        applied.ops.push_back("affine");
    }
    if (rng.bernoulli(cfg.p_photometric)) {
        applied.sequence_applied = true;
        const int pool = 7;
        int order[pool] = {0, 1, 2, 3, 4, 5, 6};
        for (int i = pool - 1; i > 0; --i)
            std::swap(order[i], order[rng.uniform_int(0, i)]);
        const int n = rng.uniform_int(cfg.photometric_min, cfg.photometric_max);
        for (int i = 0; i < n; ++i) {
            switch (order[i]) {
                case 0: {  // one of the blur family
                    const int which = rng.uniform_int(0, 2);
                    if (which == 0) gaussian_blur(s.image, rng.uniform(0.3, 1.5));
                    else if (which == 1) box_blur(s.image, rng.uniform_int(2, 5));
                    else median_blur(s.image, rng.bernoulli(0.5) ? 3 : 5);
                    applied.ops.push_back("blur");
                    break;
                }
                case 1:
                    sharpen(s.image, rng.uniform(0.0, 0.02), rng.uniform(0.95, 1.05));
                    applied.ops.push_back("sharpen");
                    break;
                case 2:
                    motion_blur(s.image, 3 + 2 * rng.uniform_int(0, 2), rng.uniform(0.0, 360.0));
                    applied.ops.push_back("motion_blur");
                    break;
                case 3:
                    add_gaussian_noise(s.image, rng.uniform(0.0, 0.02), rng.bernoulli(0.5), rng);
                    applied.ops.push_back("noise");
                    break;
                case 4:
                    channel_add(s.image, 5.0 / 255.0, rng.bernoulli(0.5), rng);
                    applied.ops.push_back("add");
                    break;
                case 5:
                    channel_multiply(s.image, 0.95, 1.05, rng.bernoulli(0.5), rng);
                    applied.ops.push_back("multiply");
                    break;
                default:
                    adjust_contrast(s.image, rng.uniform(0.95, 1.05));
                    applied.ops.push_back("contrast");
                    break;
            }
        }
    }
    if (s.image.h != cfg.out_size || s.image.w != cfg.out_size) {
        s.image = resize_image(s.image, cfg.out_size, cfg.out_size);
        s.mask = resize_mask(s.mask, cfg.out_size, cfg.out_size);
    }
    return applied;
}

// ---------------------------------------------------------------------------
// splits

std::pair<std::vector<int>, std::vector<int>> make_holdout(int count, double train_frac,
                                                           uint64_t seed) {
    check(count >= 1, "make_holdout: empty dataset");
    check(train_frac > 0 && train_frac < 1, "make_holdout: fraction must be in (0,1)");
    std::vector<int> idx(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) idx[size_t(i)] = i;
    Rng rng = Rng::child(seed, 0x73706c6974 /* "split" */);
    for (int i = count - 1; i > 0; --i) std::swap(idx[size_t(i)], idx[size_t(rng.uniform_int(0, i))]);
    const int n_train = int(std::lround(train_frac * count));
    return {std::vector<int>(idx.begin(), idx.begin() + n_train),
            std::vector<int>(idx.begin() + n_train, idx.end())};
}

std::vector<std::vector<int>> make_kfold(int count, int k, uint64_t seed) {
    check(k >= 2, "make_kfold: k must be >= 2");
    check(k <= count, "make_kfold: k exceeds dataset size");
    std::vector<int> idx(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) idx[size_t(i)] = i;
    Rng rng = Rng::child(seed, 0x6b666f6c64 /* "kfold" */);
    for (int i = count - 1; i > 0; --i) std::swap(idx[size_t(i)], idx[size_t(rng.uniform_int(0, i))]);
    std::vector<std::vector<int>> folds(static_cast<size_t>(k));
    for (int i = 0; i < count; ++i) folds[size_t(i % k)].push_back(idx[size_t(i)]);
    return folds;
}

// ---------------------------------------------------------------------------
// disk cache

namespace {

std::string item_id(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05d", index);
    return buf;
}

}  // namespace

void write_image_file(const std::string& path, const ImageF& img) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_image_file: cannot open " + path);
    const char magic[4] = {'R', 'S', 'G', 'I'};
    const uint32_t dims[3] = {uint32_t(img.c), uint32_t(img.h), uint32_t(img.w)};
    f.write(magic, 4);
    f.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    f.write(reinterpret_cast<const char*>(img.v.data()), long(img.v.size() * sizeof(float)));
}

ImageF read_image_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_image_file: cannot open " + path);
    char magic[4];
    uint32_t dims[3];
    f.read(magic, 4);
    f.read(reinterpret_cast<char*>(dims), sizeof(dims));
    if (!f || std::string(magic, 4) != "RSGI")
        throw std::runtime_error("read_image_file: bad header in " + path);
    ImageF img(static_cast<int>(dims[0]), static_cast<int>(dims[1]), static_cast<int>(dims[2]));
    f.read(reinterpret_cast<char*>(img.v.data()), long(img.v.size() * sizeof(float)));
    if (!f) throw std::runtime_error("read_image_file: truncated file " + path);
    return img;
}

void write_split_dir(const std::string& dir, const SyntheticSpec& spec,
                     const std::vector<int>& indices, const std::string& split_name) {
    spec.validate();
    const fs::path root = fs::path(dir) / split_name;
    fs::create_directories(root);

    const nlohmann::json spec_json = spec_to_json(spec);
    nlohmann::json manifest;
    manifest["version"] = 1;
    manifest["split"] = split_name;
    manifest["spec"] = spec_json;
    manifest["spec_hash"] = fnv1a64(spec_json.dump());
    nlohmann::json items = nlohmann::json::array();

    for (const int index : indices) {
        const Sample s = generate_sample(spec, index);
        const std::string id = item_id(index);
        const std::string img_name = "img_" + id + ".bin";
        const std::string mask_name = "mask_" + id + ".png";
        write_image_file((root / img_name).string(), s.image);
        write_png((root / mask_name).string(), s.mask.v.data(), s.mask.w, s.mask.h, 1);
        items.push_back({{"id", id}, {"index", index}, {"image", img_name}, {"mask", mask_name}});
    }
    manifest["items"] = items;
    std::ofstream f(root / "manifest.json");
    if (!f) throw std::runtime_error("write_split_dir: cannot write manifest");
    f << manifest.dump(2) << "\n";
}

CachedDataset load_split_dir(const std::string& dir) {
    const fs::path root(dir);
    std::ifstream f(root / "manifest.json");
    if (!f) throw std::runtime_error("load_split_dir: missing manifest in " + dir);
    nlohmann::json manifest;
    f >> manifest;

    CachedDataset ds;
    ds.multiclass = manifest.at("spec").at("multiclass").get<bool>();
    ds.size = manifest.at("spec").at("size").get<int>();
    ds.spec_hash = manifest.at("spec_hash").get<uint64_t>();
    for (const auto& item : manifest.at("items")) {
        Sample s;
        s.index = item.at("index").get<int>();
        s.image = read_image_file((root / item.at("image").get<std::string>()).string());
        const PngImage png = read_png((root / item.at("mask").get<std::string>()).string());
        check(png.channels == 1, "load_split_dir: mask must be single channel");
        s.mask.h = png.height;
        s.mask.w = png.width;
        s.mask.v = png.data;
        ds.samples.push_back(std::move(s));
        ds.ids.push_back(item.at("id").get<std::string>());
    }
    return ds;
}

// ---------------------------------------------------------------------------
// tensor bridging

template <class S>
TensorT<S> images_to_tensor(const std::vector<ImageF>& images) {
    check(!images.empty(), "images_to_tensor: empty batch");
    const int c = images[0].c, h = images[0].h, w = images[0].w;
    for (const auto& img : images)
        check(img.c == c && img.h == h && img.w == w, "images_to_tensor: ragged batch");
    TensorT<S> t = TensorT<S>::zeros(Shape{int(images.size()), c, h, w});
    auto& tv = t.values();
    size_t off = 0;
    for (const auto& img : images)
        for (const float v : img.v) tv[off++] = S(v);
    return t;
}

template <class S>
TensorT<S> masks_to_binary_tensor(const std::vector<Mask>& masks) {
    check(!masks.empty(), "masks_to_binary_tensor: empty batch");
    const int h = masks[0].h, w = masks[0].w;
    TensorT<S> t = TensorT<S>::zeros(Shape{int(masks.size()), 1, h, w});
    auto& tv = t.values();
    size_t off = 0;
    for (const auto& m : masks) {
        check(m.h == h && m.w == w, "masks_to_binary_tensor: ragged batch");
        for (const uint8_t v : m.v) tv[off++] = v != 0 ? S(1) : S(0);
    }
    return t;
}

std::vector<int> masks_to_labels(const std::vector<Mask>& masks) {
    std::vector<int> labels;
    for (const auto& m : masks)
        for (const uint8_t v : m.v) labels.push_back(int(v));
    return labels;
}

template TensorT<float> images_to_tensor<float>(const std::vector<ImageF>&);
template TensorT<double> images_to_tensor<double>(const std::vector<ImageF>&);
template TensorT<float> masks_to_binary_tensor<float>(const std::vector<Mask>&);
template TensorT<double> masks_to_binary_tensor<double>(const std::vector<Mask>&);

}  // namespace raseg
