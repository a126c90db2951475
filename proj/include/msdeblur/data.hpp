#pragma once

// Paired blur/sharp datasets: directory scanning, patch sampling with
// augmentation, x2 coarse targets, and a synthetic blur generator
// (y = G x + n with uniform or 2x2-region kernels).

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "msdeblur/downscale.hpp"
#include "msdeblur/geometry.hpp"
#include "msdeblur/image_io.hpp"
#include "msdeblur/random.hpp"

namespace msdeblur {

namespace fs = std::filesystem;

template <class T>
struct SamplePair {
    Tensor<T> blurred;
    Tensor<T> sharp;
    std::string source_id;
    std::string sequence;
};

// Odd-sized, nonnegative, sums to one.
struct Kernel2D {
    int size = 1;
    std::vector<double> weights{1.0};

    [[nodiscard]] double at(int y, int x) const { return weights[static_cast<std::size_t>(y) * size + x]; }

    void normalize() {
        double total = 0;
        for (double w : weights) total += w;
        require(total > 0, "kernel has zero mass");
        for (double& w : weights) w /= total;
    }

    void validate() const {
        require(size >= 1 && size % 2 == 1, "kernel size must be odd");
        require(weights.size() == static_cast<std::size_t>(size) * size, "kernel weight count mismatch");
        double total = 0;
        for (double w : weights) {
            require(w >= 0, "kernel weights must be nonnegative");
            total += w;
        }
        require(std::abs(total - 1.0) <= 1e-6, "kernel must sum to 1");
    }

    static Kernel2D delta() { return {}; }

    static Kernel2D box(int size) {
        require(size >= 1 && size % 2 == 1, "box kernel size must be odd");
        Kernel2D k{size, std::vector<double>(static_cast<std::size_t>(size) * size, 1.0)};
        k.normalize();
        return k;
    }

    static Kernel2D gaussian(double sigma) {
        require(sigma > 0, "gaussian kernel sigma must be positive");
        const int r = static_cast<int>(std::ceil(3 * sigma));
        Kernel2D k{2 * r + 1, {}};
        k.weights.resize(static_cast<std::size_t>(k.size) * k.size);
        for (int y = -r; y <= r; ++y)
            for (int x = -r; x <= r; ++x)
                k.weights[static_cast<std::size_t>(y + r) * k.size + (x + r)] =
                    std::exp(-(x * x + y * y) / (2 * sigma * sigma));
        k.normalize();
        return k;
    }

    // Linear motion: a line of `length` pixels through the center at
    // `angle_deg`, rasterized with bilinear splatting of dense samples.
    static Kernel2D motion(double length, double angle_deg) {
        require(length >= 1, "motion kernel length must be >= 1");
        const int r = static_cast<int>(std::ceil(length / 2)) + 1;
        Kernel2D k{2 * r + 1, {}};
        k.weights.assign(static_cast<std::size_t>(k.size) * k.size, 0.0);
        const double a = angle_deg * std::numbers::pi / 180.0;
        const int samples = static_cast<int>(std::ceil(length * 8)) + 1;
        for (int s = 0; s < samples; ++s) {
            const double t = samples == 1 ? 0.0 : (static_cast<double>(s) / (samples - 1) - 0.5) * (length - 1);
            const double px = r + t * std::cos(a);
            const double py = r - t * std::sin(a);
            const int x0 = static_cast<int>(std::floor(px));
            const int y0 = static_cast<int>(std::floor(py));
            const double fx = px - x0;
            const double fy = py - y0;
            auto splat = [&](int y, int x, double w) {
                if (y >= 0 && y < k.size && x >= 0 && x < k.size) k.weights[static_cast<std::size_t>(y) * k.size + x] += w;
            };
            splat(y0, x0, (1 - fx) * (1 - fy));
            splat(y0, x0 + 1, fx * (1 - fy));
            splat(y0 + 1, x0, (1 - fx) * fy);
            splat(y0 + 1, x0 + 1, fx * fy);
        }
        k.normalize();
        return k;
    }
};

// Blur operator G plus noise level. One kernel = spatially uniform blur;
// four kernels = 2x2 grid of regions blended across a feather band.
struct BlurKernel {
    std::vector<Kernel2D> regions{Kernel2D::delta()};
    double noise_sigma = 0.0;
    int feather = 8;
    std::string descriptor = "delta";

    void validate() const {
        require(regions.size() == 1 || regions.size() == 4, "blur needs 1 or 4 region kernels");
        for (const auto& k : regions) k.validate();
        require(noise_sigma >= 0, "noise sigma must be >= 0");
        require(feather >= 1, "feather band must be >= 1 pixel");
    }

    [[nodiscard]] int max_size() const {
        int m = 0;
        for (const auto& k : regions) m = std::max(m, k.size);
        return m;
    }
};

// Kernel descriptors: delta | boxN | gauss:SIGMA | motion:LEN:ANGLE |
// nonuniform (four random motion kernels drawn from `seed`).
inline BlurKernel parse_blur_kernel(const std::string& desc, double noise_sigma, std::uint64_t seed = 0) {
    BlurKernel k;
    k.noise_sigma = noise_sigma;
    k.descriptor = desc;
    auto fields = [&] {
        std::vector<std::string> out;
        std::stringstream ss(desc);
        std::string f;
        while (std::getline(ss, f, ':')) out.push_back(f);
        return out;
    }();
    try {
        if (desc == "delta") {
            k.regions = {Kernel2D::delta()};
        } else if (desc.rfind("box", 0) == 0 && fields.size() == 1) {
            k.regions = {Kernel2D::box(std::stoi(desc.substr(3)))};
        } else if (fields.size() == 2 && fields[0] == "gauss") {
            k.regions = {Kernel2D::gaussian(std::stod(fields[1]))};
        } else if (fields.size() == 3 && fields[0] == "motion") {
            k.regions = {Kernel2D::motion(std::stod(fields[1]), std::stod(fields[2]))};
        } else if (desc == "nonuniform") {
            Rng rng(derive_seed(seed, 0x6b65726eULL));
            k.regions.clear();
            std::ostringstream d;
            d << "nonuniform";
            for (int i = 0; i < 4; ++i) {
                const double len = rng.uniform(3.0, 9.0);
                const double ang = rng.uniform(0.0, 180.0);
                k.regions.push_back(Kernel2D::motion(len, ang));
                d << std::fixed << std::setprecision(2) << (i ? ";" : "[") << "motion:" << len << ":" << ang;
            }
            d << "]";
            k.descriptor = d.str();
        } else {
            throw std::invalid_argument(desc);
        }
    } catch (const ContractError&) {
        throw;
    } catch (const std::exception&) {
        throw ContractError("unknown blur kernel descriptor '" + desc + "'");
    }
    k.validate();
    return k;
}

// Convolution with edge-replicated boundaries.
template <class T>
Tensor<T> convolve_replicate(const Tensor<T>& img, const Kernel2D& k) {
    const int r = k.size / 2;
    Tensor<T> out(img.shape());
    for (int n = 0; n < img.n(); ++n)
        for (int c = 0; c < img.c(); ++c)
            for (int y = 0; y < img.h(); ++y)
                for (int x = 0; x < img.w(); ++x) {
                    double acc = 0;
                    for (int i = 0; i < k.size; ++i) {
                        const int sy = std::clamp(y + r - i, 0, img.h() - 1);
                        for (int j = 0; j < k.size; ++j) {
                            const int sx = std::clamp(x + r - j, 0, img.w() - 1);
                            acc += k.at(i, j) * img(n, c, sy, sx);
                        }
                    }
                    out(n, c, y, x) = static_cast<T>(acc);
                }
    return out;
}

namespace detail {

// Weight of the "far" side of a boundary at `mid`, ramping over `feather` pixels.
inline double feather_weight(int pos, int mid, int feather) {
    const double t = (pos + 0.5 - (mid - feather / 2.0)) / feather;
    return std::clamp(t, 0.0, 1.0);
}

}  // namespace detail

template <class T>
SamplePair<T> synth_blur(const Tensor<T>& sharp, const BlurKernel& k, std::uint64_t seed,
                         std::string source_id = {}, std::string sequence = {}) {
    k.validate();
    require(k.max_size() <= sharp.h() && k.max_size() <= sharp.w(),
            "synth_blur: kernel of size " + std::to_string(k.max_size()) + " larger than image " +
                to_string(sharp.shape()));
    Tensor<T> blurred;
    if (k.regions.size() == 1) {
        blurred = convolve_replicate(sharp, k.regions[0]);
    } else {
        std::vector<Tensor<T>> cells;
        for (const auto& kr : k.regions) cells.push_back(convolve_replicate(sharp, kr));
        blurred = Tensor<T>(sharp.shape());
        const int my = sharp.h() / 2;
        const int mx = sharp.w() / 2;
        for (int n = 0; n < sharp.n(); ++n)
            for (int c = 0; c < sharp.c(); ++c)
                for (int y = 0; y < sharp.h(); ++y) {
                    const double wy = detail::feather_weight(y, my, k.feather);
                    for (int x = 0; x < sharp.w(); ++x) {
                        const double wx = detail::feather_weight(x, mx, k.feather);
                        const double v = (1 - wy) * (1 - wx) * cells[0](n, c, y, x) +
                                         (1 - wy) * wx * cells[1](n, c, y, x) +
                                         wy * (1 - wx) * cells[2](n, c, y, x) + wy * wx * cells[3](n, c, y, x);
                        blurred(n, c, y, x) = static_cast<T>(v);
                    }
                }
    }
    if (k.noise_sigma > 0) {
        Rng rng(seed);
        for (auto& v : blurred.values()) v += static_cast<T>(k.noise_sigma * rng.normal());
    }
    return {clamp_image(std::move(blurred)), sharp, std::move(source_id), std::move(sequence)};
}

template <class T>
Tensor<T> make_coarse_gt(const Tensor<T>& sharp) {
    return bicubic_downsample(sharp, 2);
}

enum class SharpTemplate { shapes, step };

// Procedural sharp content: smooth background, rectangles, discs, stripes
// and thin lines in random colors. `step` is a vertical black/white edge.
inline Tensor<float> make_sharp_image(int h, int w, std::uint64_t seed, SharpTemplate tmpl = SharpTemplate::shapes) {
    Tensor<float> img(1, 3, h, w);
    if (tmpl == SharpTemplate::step) {
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = w / 2; x < w; ++x) img(0, c, y, x) = 1.0f;
        return img;
    }
    Rng rng(seed);
    auto color = [&] { return std::array<double, 3>{rng.uniform(), rng.uniform(), rng.uniform()}; };
    const auto c0 = color();
    const auto c1 = color();
    const double gx = rng.uniform(-1, 1), gy = rng.uniform(-1, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double t = std::clamp(0.5 + 0.5 * (gx * (x - w / 2.0) / w + gy * (y - h / 2.0) / h), 0.0, 1.0);
            for (int c = 0; c < 3; ++c) img(0, c, y, x) = static_cast<float>((1 - t) * c0[c] + t * c1[c]);
        }
    const int n_shapes = 4 + rng.below(5);
    for (int s = 0; s < n_shapes; ++s) {
        const auto col = color();
        const int kind = rng.below(4);
        const double cx = rng.uniform(0, w), cy = rng.uniform(0, h);
        const double sx = rng.uniform(0.08, 0.35) * w, sy = rng.uniform(0.08, 0.35) * h;
        const double period = rng.uniform(3.0, 8.0);
        const double ang = rng.uniform(0.0, std::numbers::pi);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double dx = x - cx, dy = y - cy;
                bool inside = false;
                switch (kind) {
                    case 0: inside = std::abs(dx) < sx / 2 && std::abs(dy) < sy / 2; break;
                    case 1: inside = dx * dx / (sx * sx / 4) + dy * dy / (sy * sy / 4) < 1.0; break;
                    case 2:
                        inside = std::abs(dx) < sx / 2 && std::abs(dy) < sy / 2 &&
                                 std::fmod(std::abs(dx * std::cos(ang) + dy * std::sin(ang)), period) < period / 2;
                        break;
                    default: inside = std::abs(-dx * std::sin(ang) + dy * std::cos(ang)) < 1.0 &&
                                      std::abs(dx * std::cos(ang) + dy * std::sin(ang)) < sx; break;
                }
                if (inside)
                    for (int c = 0; c < 3; ++c) img(0, c, y, x) = static_cast<float>(col[c]);
            }
    }
    return img;
}

struct PatchSpec {
    int size_stage1 = 192;
    int size_stage2 = 96;
    bool random_crop = true;
    bool hflip = true;
    bool rot90 = true;

    void validate() const {
        require(size_stage1 > 0 && size_stage1 % 8 == 0 && size_stage2 > 0 && size_stage2 % 8 == 0,
                "patch sizes must be positive multiples of 8");
    }
};

namespace detail {

template <class T>
Tensor<T> crop(const Tensor<T>& img, int y0, int x0, int size) {
    Tensor<T> out(img.n(), img.c(), size, size);
    for (int n = 0; n < img.n(); ++n)
        for (int c = 0; c < img.c(); ++c)
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x) out(n, c, y, x) = img(n, c, y0 + y, x0 + x);
    return out;
}

}  // namespace detail

template <class T>
Tensor<T> hflip(const Tensor<T>& img) {
    Tensor<T> out(img.shape());
    for (int n = 0; n < img.n(); ++n)
        for (int c = 0; c < img.c(); ++c)
            for (int y = 0; y < img.h(); ++y)
                for (int x = 0; x < img.w(); ++x) out(n, c, y, img.w() - 1 - x) = img(n, c, y, x);
    return out;
}

// Rotates 90 degrees counter-clockwise.
template <class T>
Tensor<T> rot90(const Tensor<T>& img) {
    Tensor<T> out(img.n(), img.c(), img.w(), img.h());
    for (int n = 0; n < img.n(); ++n)
        for (int c = 0; c < img.c(); ++c)
            for (int y = 0; y < img.h(); ++y)
                for (int x = 0; x < img.w(); ++x) out(n, c, img.w() - 1 - x, y) = img(n, c, y, x);
    return out;
}

// Square crop of `size` with identical window and augmentation on both
// images, fully determined by `seed`.
template <class T>
std::pair<Tensor<T>, Tensor<T>> sample_patch(const SamplePair<T>& pair, int size, std::uint64_t seed,
                                             const PatchSpec& spec = {}) {
    require(pair.blurred.shape() == pair.sharp.shape(), "sample_patch: blurred/sharp dims differ");
    require(pair.sharp.h() >= size && pair.sharp.w() >= size,
            "sample_patch: image " + to_string(pair.sharp.shape()) + " smaller than patch " + std::to_string(size));
    Rng rng(seed);
    int y0 = (pair.sharp.h() - size) / 2;
    int x0 = (pair.sharp.w() - size) / 2;
    if (spec.random_crop) {
        y0 = rng.below(pair.sharp.h() - size + 1);
        x0 = rng.below(pair.sharp.w() - size + 1);
    }
    const bool flip = spec.hflip && rng.coin();
    const bool rot = spec.rot90 && rng.coin();
    auto apply = [&](const Tensor<T>& img) {
        Tensor<T> p = detail::crop(img, y0, x0, size);
        if (flip) p = hflip(p);
        if (rot) p = rot90(p);
        return p;
    };
    return {apply(pair.blurred), apply(pair.sharp)};
}

struct PairRef {
    fs::path blur_path;
    fs::path sharp_path;
    std::string source_id;  // "<sequence>/<file name>"
    std::string sequence;
};

struct DatasetIndex {
    std::vector<PairRef> pairs;
    std::vector<std::string> warnings;

    [[nodiscard]] std::size_t size() const { return pairs.size(); }
};

// <root>/<sequence>/{blur,sharp}/*.png with matching names. Orphans are
// reported in `warnings` and excluded. Order is lexicographic by
// (sequence, file name).
inline DatasetIndex scan_dataset(const fs::path& root) {
    if (!fs::is_directory(root)) throw ImageIoError("dataset root is not a directory: " + root.string());
    DatasetIndex idx;
    std::vector<fs::path> seqs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) seqs.push_back(e.path());
    std::sort(seqs.begin(), seqs.end());
    auto pngs = [](const fs::path& dir) {
        std::set<std::string> names;
        if (!fs::is_directory(dir)) return names;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file() && e.path().extension() == ".png") names.insert(e.path().filename().string());
        return names;
    };
    for (const auto& seq : seqs) {
        const auto seq_name = seq.filename().string();
        const auto blurs = pngs(seq / "blur");
        const auto sharps = pngs(seq / "sharp");
        if (blurs.empty() && sharps.empty()) continue;
        for (const auto& name : blurs) {
            if (!sharps.contains(name)) {
                idx.warnings.push_back("orphan blur image without sharp counterpart: " + (seq / "blur" / name).string());
                continue;
            }
            idx.pairs.push_back({seq / "blur" / name, seq / "sharp" / name, seq_name + "/" + name, seq_name});
        }
        for (const auto& name : sharps)
            if (!blurs.contains(name))
                idx.warnings.push_back("orphan sharp image without blur counterpart: " + (seq / "sharp" / name).string());
    }
    return idx;
}

inline SamplePair<float> load_pair(const PairRef& ref) {
    SamplePair<float> p{read_png(ref.blur_path.string()), read_png(ref.sharp_path.string()), ref.source_id,
                        ref.sequence};
    if (p.blurred.shape() != p.sharp.shape())
        throw ImageIoError("blur/sharp dims differ for " + ref.source_id);
    return p;
}

inline std::vector<SamplePair<float>> load_dataset(const DatasetIndex& idx) {
    std::vector<SamplePair<float>> out;
    out.reserve(idx.size());
    for (const auto& r : idx.pairs) out.push_back(load_pair(r));
    return out;
}

struct SynthOptions {
    int n_pairs = 8;
    int height = 64;
    int width = 64;
    std::string kernel = "box5";
    double sigma = 0.0;
    std::uint64_t seed = 0;
    int frames_per_sequence = 4;
    SharpTemplate tmpl = SharpTemplate::shapes;
};

// Generates one synthetic pair for index i; values are exactly what the
// written PNGs decode to.
inline SamplePair<float> synth_pair(const SynthOptions& o, int i) {
    const std::uint64_t pair_seed = derive_seed(o.seed, static_cast<std::uint64_t>(i));
    Tensor<float> sharp = quantize_u8(make_sharp_image(o.height, o.width, derive_seed(pair_seed, 1), o.tmpl));
    const BlurKernel k = parse_blur_kernel(o.kernel, o.sigma, pair_seed);
    auto pair = synth_blur(sharp, k, derive_seed(pair_seed, 2));
    pair.blurred = quantize_u8(std::move(pair.blurred));
    std::ostringstream seq, frame;
    seq << "seq" << std::setw(3) << std::setfill('0') << i / o.frames_per_sequence;
    frame << std::setw(6) << std::setfill('0') << i % o.frames_per_sequence << ".png";
    pair.sequence = seq.str();
    pair.source_id = pair.sequence + "/" + frame.str();
    return pair;
}

// Writes the synthetic set in the paired directory layout plus manifest.txt
// (sequence frame kernel sigma seed per line).
inline std::vector<std::string> write_synthetic_dataset(const fs::path& out, const SynthOptions& o) {
    require(o.n_pairs >= 1 && o.frames_per_sequence >= 1, "synthetic dataset: need at least one pair");
    fs::create_directories(out);
    std::ofstream manifest(out / "manifest.txt");
    manifest << "# sequence frame kernel sigma seed\n";
    std::vector<std::string> ids;
    for (int i = 0; i < o.n_pairs; ++i) {
        const auto pair = synth_pair(o, i);
        const auto frame = pair.source_id.substr(pair.sequence.size() + 1);
        fs::create_directories(out / pair.sequence / "blur");
        fs::create_directories(out / pair.sequence / "sharp");
        write_png((out / pair.sequence / "blur" / frame).string(), pair.blurred);
        write_png((out / pair.sequence / "sharp" / frame).string(), pair.sharp);
        const std::uint64_t pair_seed = derive_seed(o.seed, static_cast<std::uint64_t>(i));
        manifest << pair.sequence << " " << frame << " " << parse_blur_kernel(o.kernel, o.sigma, pair_seed).descriptor
                 << " " << std::setprecision(17) << o.sigma << " " << pair_seed << "\n";
        ids.push_back(pair.source_id);
    }
    return ids;
}

}  // namespace msdeblur
