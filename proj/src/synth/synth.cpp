#include "mfpt/synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "mfpt/core/error.hpp"
#include "mfpt/core/image.hpp"

namespace fs = std::filesystem;

namespace mfpt::synth {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

class Rng {
public:
    explicit Rng(unsigned long seed) : gen_(seed) {}

    double uniform() {
        return static_cast<double>(gen_() >> 11) * (1.0 / 9007199254740992.0);
    }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(gen_() % static_cast<unsigned long>(hi - lo + 1));
    }

private:
    std::mt19937_64 gen_;
};

// Smooth color field from a few random sinusoids plus light pixel noise;
// gives the backbone texture to latch onto without any real-image inputs.
Image make_source_image(Rng& rng, int width, int height) {
    struct Wave {
        double fx, fy, phase, amp;
    };
    Image img(width, height, 3);
    for (int c = 0; c < 3; ++c) {
        std::vector<Wave> waves(3);
        for (auto& w : waves) {
            w.fx = rng.uniform(0.5, 3.0);
            w.fy = rng.uniform(0.5, 3.0);
            w.phase = rng.uniform(0.0, kTwoPi);
            w.amp = rng.uniform(20.0, 45.0);
        }
        const double base = rng.uniform(70.0, 180.0);
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                double v = base;
                for (const auto& w : waves) {
                    v += w.amp * std::sin(kTwoPi * (w.fx * x / width + w.fy * y / height) +
                                          w.phase);
                }
                v += rng.uniform(-6.0, 6.0);
                img.at(x, y, c) = static_cast<uint8_t>(std::clamp(v, 0.0, 255.0));
            }
        }
    }
    return img;
}

struct Region {
    int x0, y0, w, h;
};

Region plant_region(Rng& rng, int width, int height, double area) {
    const double target = area * width * height;
    const double aspect = rng.uniform(0.8, 1.25);
    int rh = std::clamp(static_cast<int>(std::lround(std::sqrt(target / aspect))), 2,
                        height - 2);
    int rw = std::clamp(static_cast<int>(std::lround(target / rh)), 2, width - 2);
    Region r;
    r.w = rw;
    r.h = rh;
    r.x0 = rng.uniform_int(1, width - rw - 1);
    r.y0 = rng.uniform_int(1, height - rh - 1);
    return r;
}

// Replace the region with texture resampled from elsewhere in the image,
// plus strong high-frequency noise so the edit carries a frequency signature.
Image edit_image(Rng& rng, const Image& source, const Region& r) {
    Image out = source;
    const int sx = rng.uniform_int(0, source.width - r.w);
    const int sy = rng.uniform_int(0, source.height - r.h);
    for (int dy = 0; dy < r.h; ++dy) {
        for (int dx = 0; dx < r.w; ++dx) {
            for (int c = 0; c < 3; ++c) {
                const double src = source.at((sx + r.w - 1 - dx), (sy + r.h - 1 - dy), c);
                const double noisy = src + rng.uniform(-48.0, 48.0);
                out.at(r.x0 + dx, r.y0 + dy, c) =
                    static_cast<uint8_t>(std::clamp(noisy, 0.0, 255.0));
            }
        }
    }
    return out;
}

}  // namespace

void SynthOptions::validate() const {
    if (count < 1) throw UsageError("synth: count must be >= 1");
    if (width < 8 || height < 8) throw UsageError("synth: size must be at least 8x8");
    if (!(area > 0.0 && area < 0.9)) throw UsageError("synth: area must be in (0, 0.9)");
    if (!(authentic_frac >= 0.0 && authentic_frac <= 1.0)) {
        throw UsageError("synth: authentic_frac must be in [0, 1]");
    }
}

data::DatasetManifest generate_dataset(const std::string& out_dir,
                                       const SynthOptions& options) {
    options.validate();
    fs::create_directories(fs::path(out_dir) / "images");
    fs::create_directories(fs::path(out_dir) / "masks");

    const int n_auth = static_cast<int>(std::lround(options.authentic_frac * options.count));
    const int n_edit = options.count - n_auth;
    const int n_sources = std::max(n_auth, n_edit);

    static const data::Split kCycle[3] = {data::Split::Train, data::Split::Val,
                                          data::Split::Test};

    Rng rng(options.seed);
    data::DatasetManifest manifest;
    manifest.base_dir = out_dir;

    for (int i = 0; i < n_sources; ++i) {
        const data::Split split = kCycle[i % 3];
        const std::string source_id = "src" + std::to_string(i);
        const Image source = make_source_image(rng, options.width, options.height);

        if (i < n_auth) {
            data::ImageSample s;
            s.id = source_id + "_orig";
            s.source_id = source_id;
            s.role = data::Role::Authentic;
            s.width = options.width;
            s.height = options.height;
            s.image_path = "images/" + s.id + ".png";
            s.split = split;
            imageio::save(manifest.resolve(s.image_path), source);
            manifest.samples.push_back(std::move(s));
        }
        if (i < n_edit) {
            const Region r = plant_region(rng, options.width, options.height, options.area);
            const Image edited = edit_image(rng, source, r);
            data::PixelMask mask(options.width, options.height);
            for (int dy = 0; dy < r.h; ++dy)
                for (int dx = 0; dx < r.w; ++dx) mask.at(r.x0 + dx, r.y0 + dy) = 1;

            data::ImageSample s;
            s.id = source_id + "_edit";
            s.source_id = source_id;
            s.role = data::Role::Edited;
            s.width = options.width;
            s.height = options.height;
            s.image_path = "images/" + s.id + ".png";
            s.mask_path = "masks/" + s.id + ".png";
            s.split = split;
            imageio::save(manifest.resolve(s.image_path), edited);
            data::save_mask(manifest.resolve(*s.mask_path), mask);
            manifest.samples.push_back(std::move(s));
        }
    }

    data::save_manifest((fs::path(out_dir) / "manifest.jsonl").string(), manifest);
    return manifest;
}

}  // namespace mfpt::synth
