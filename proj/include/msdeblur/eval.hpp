#pragma once

// Evaluation: PSNR / SSIM, benchmark reports, qualitative montages and the
// decomposition diagnostic (backbone bypassed, long skips removed).

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "msdeblur/data.hpp"
#include "msdeblur/loss.hpp"
#include "msdeblur/model.hpp"

namespace msdeblur {

// 10 log10(max^2 / MSE) over all elements; +inf for identical inputs.
template <class T>
double psnr(const Tensor<T>& out, const Tensor<T>& gt, double max_val = 1.0) {
    require(out.shape() == gt.shape(), "psnr: shape mismatch " + to_string(out.shape()) + " vs " + to_string(gt.shape()));
    double se = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double d = static_cast<double>(out[i]) - static_cast<double>(gt[i]);
        se += d * d;
    }
    if (se == 0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(max_val * max_val / (se / static_cast<double>(out.size())));
}

// SSIM with default parameters, averaged over RGB channels. Computed in
// double regardless of the input type.
template <class T>
double eval_ssim(const Tensor<T>& out, const Tensor<T>& gt) {
    return ssim(tensor_cast<double>(out), tensor_cast<double>(gt), SsimParams{});
}

struct ImageMetrics {
    std::string id;
    double psnr_db = 0;
    double ssim = 0;
    double infer_time_s = 0;
    double input_psnr_db = 0;  // blurred input vs ground truth
};

struct MetricsReport {
    std::vector<ImageMetrics> per_image;
    double mean_psnr = 0;
    double mean_ssim = 0;
    double mean_time = 0;
    double mean_input_psnr = 0;
    std::size_t param_count = 0;
    std::string fingerprint;
    std::vector<std::string> warnings;

    void finalize() {
        mean_psnr = mean_ssim = mean_time = mean_input_psnr = 0;
        if (per_image.empty()) return;
        for (const auto& m : per_image) {
            mean_psnr += m.psnr_db;
            mean_ssim += m.ssim;
            mean_time += m.infer_time_s;
            mean_input_psnr += m.input_psnr_db;
        }
        const double n = static_cast<double>(per_image.size());
        mean_psnr /= n;
        mean_ssim /= n;
        mean_time /= n;
        mean_input_psnr /= n;
    }
};

namespace detail {

inline std::string fmt_metric(double v, int prec) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
}

}  // namespace detail

inline void write_report_csv(const std::filesystem::path& path, const MetricsReport& r) {
    std::ofstream os(path);
    os << "id,psnr_db,ssim,infer_time_s,input_psnr_db\n";
    for (const auto& m : r.per_image)
        os << m.id << "," << detail::fmt_metric(m.psnr_db, 6) << "," << detail::fmt_metric(m.ssim, 8) << ","
           << detail::fmt_metric(m.infer_time_s, 6) << "," << detail::fmt_metric(m.input_psnr_db, 6) << "\n";
    os << "mean," << detail::fmt_metric(r.mean_psnr, 6) << "," << detail::fmt_metric(r.mean_ssim, 8) << ","
       << detail::fmt_metric(r.mean_time, 6) << "," << detail::fmt_metric(r.mean_input_psnr, 6) << "\n";
}

inline std::string format_report_table(const MetricsReport& r) {
    std::ostringstream os;
    os << "config " << r.fingerprint << ", " << r.param_count << " parameters\n";
    os << std::left << std::setw(28) << "image" << std::right << std::setw(12) << "PSNR(dB)" << std::setw(10) << "SSIM"
       << std::setw(12) << "time(s)" << std::setw(14) << "input PSNR" << "\n";
    auto row = [&](const std::string& id, double p, double s, double t, double ip) {
        os << std::left << std::setw(28) << id << std::right << std::setw(12) << detail::fmt_metric(p, 3)
           << std::setw(10) << detail::fmt_metric(s, 4) << std::setw(12) << detail::fmt_metric(t, 4) << std::setw(14)
           << detail::fmt_metric(ip, 3) << "\n";
    };
    for (const auto& m : r.per_image) row(m.id, m.psnr_db, m.ssim, m.infer_time_s, m.input_psnr_db);
    row("mean", r.mean_psnr, r.mean_ssim, r.mean_time, r.mean_input_psnr);
    for (const auto& w : r.warnings) os << "warning: " << w << "\n";
    return os.str();
}

// Horizontal strip of equally sized 3-channel images with a 4-pixel gap.
inline Tensor<float> montage(const std::vector<Tensor<float>>& panels) {
    require(!panels.empty(), "montage needs at least one panel");
    const int h = panels.front().h();
    const int w = panels.front().w();
    constexpr int gap = 4;
    const int n = static_cast<int>(panels.size());
    Tensor<float> out(1, 3, h, n * w + (n - 1) * gap, 1.0f);
    for (int p = 0; p < n; ++p) {
        require(panels[p].h() == h && panels[p].w() == w && panels[p].c() == 3, "montage: panel size mismatch");
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) out(0, c, y, p * (w + gap) + x) = panels[p](0, c, y, x);
    }
    return out;
}

struct BenchmarkOptions {
    std::filesystem::path out_dir;  // report.csv and report.txt; empty: no files
    bool montage = false;           // blurred | output | sharp strips
    bool save_outputs = false;
};

// Deblurs every pair in the index, timing pad -> infer -> crop (disk I/O
// excluded). Unreadable pairs are skipped and listed in the warnings.
inline MetricsReport benchmark(DeblurModel<float>& model, const DatasetIndex& data, const BenchmarkOptions& opts = {}) {
    MetricsReport r;
    r.param_count = count_parameters(model);
    r.fingerprint = fingerprint(model.config());
    r.warnings = data.warnings;
    if (!opts.out_dir.empty()) std::filesystem::create_directories(opts.out_dir);
    for (const auto& ref : data.pairs) {
        SamplePair<float> pair;
        try {
            pair = load_pair(ref);
        } catch (const std::exception& e) {
            r.warnings.push_back("skipped " + ref.source_id + ": " + e.what());
            continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Tensor<float> out = model.infer(pair.blurred);
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        r.per_image.push_back({ref.source_id, psnr(out, pair.sharp), eval_ssim(out, pair.sharp), dt,
                               psnr(pair.blurred, pair.sharp)});
        if (!opts.out_dir.empty()) {
            std::string stem = ref.source_id;
            for (auto& ch : stem)
                if (ch == '/') ch = '_';
            if (stem.size() > 4 && stem.ends_with(".png")) stem.resize(stem.size() - 4);
            if (opts.save_outputs) write_png((opts.out_dir / (stem + "_out.png")).string(), out);
            if (opts.montage)
                write_png((opts.out_dir / (stem + "_montage.png")).string(), montage({pair.blurred, out, pair.sharp}));
        }
    }
    r.finalize();
    if (!opts.out_dir.empty()) {
        write_report_csv(opts.out_dir / "report.csv", r);
        std::ofstream(opts.out_dir / "report.txt") << format_report_table(r);
    }
    return r;
}

struct Decomposition {
    Tensor<float> input;
    Tensor<float> full;
    Tensor<float> no_backbone;
    Tensor<float> no_long_skip;
};

// (a) input, (b) full output, (c) output with every backbone replaced by
// identity, (d) output with the long (residual-in-residual) skips removed.
inline Decomposition decompose(DeblurModel<float>& model, const Tensor<float>& img,
                               const std::filesystem::path& out_dir = {}) {
    Decomposition d;
    d.input = img;
    model.set_options({});
    d.full = model.infer(img);
    model.set_options({.bypass_backbone = true, .long_skip = true});
    d.no_backbone = model.infer(img);
    model.set_options({.bypass_backbone = false, .long_skip = false});
    d.no_long_skip = model.infer(img);
    model.set_options({});
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_png((out_dir / "a_input.png").string(), d.input);
        write_png((out_dir / "b_full.png").string(), d.full);
        write_png((out_dir / "c_no_backbone.png").string(), d.no_backbone);
        write_png((out_dir / "d_no_long_skip.png").string(), d.no_long_skip);
    }
    return d;
}

}  // namespace msdeblur
