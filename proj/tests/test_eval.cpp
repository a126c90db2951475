#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "test_util.hpp"

using namespace msdeblur;
using testutil::random_tensor;
using testutil::TempDir;
namespace fs = std::filesystem;

namespace {

DatasetIndex small_dataset(const fs::path& root, int n = 3) {
    SynthOptions o;
    o.n_pairs = n;
    o.height = 24;
    o.width = 20;
    o.sigma = 0.01;
    write_synthetic_dataset(root, o);
    return scan_dataset(root);
}

std::vector<std::string> metric_columns(const fs::path& csv) {
    std::ifstream f(csv);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(f, line)) {
        // Drop the timing column (4th field).
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() == 5) fields.erase(fields.begin() + 3);
        std::string joined;
        for (const auto& x : fields) joined += x + ",";
        out.push_back(joined);
    }
    return out;
}

}  // namespace

TEST(Psnr, Examples) {
    const auto gt = random_tensor(1, 3, 8, 8, 1, 0, 0.8);
    Tensor<double> out = gt;
    for (auto& v : out.values()) v += 0.1;
    EXPECT_NEAR(psnr(out, gt), 20.0, 1e-6);
    EXPECT_TRUE(std::isinf(psnr(gt, gt)));
    EXPECT_GT(psnr(gt, gt), 0);
    EXPECT_THROW(psnr(gt, random_tensor(1, 3, 8, 7, 2)), ContractError);
}

TEST(Psnr, MatchesDirectFormula) {
    const auto a = random_tensor(1, 3, 16, 16, 3), b = random_tensor(1, 3, 16, 16, 4);
    double se = 0;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) se += std::pow(a(0, c, y, x) - b(0, c, y, x), 2);
    EXPECT_NEAR(psnr(a, b), 10 * std::log10(1.0 / (se / 768)), 1e-9);
    EXPECT_NEAR(psnr(a, b, 255.0), 10 * std::log10(255.0 * 255.0 / (se / 768)), 1e-9);
}

TEST(EvalSsim, DelegatesToLossSsim) {
    const auto a = random_tensor<float>(1, 3, 16, 16, 5), b = random_tensor<float>(1, 3, 16, 16, 6);
    EXPECT_NEAR(eval_ssim(a, a), 1.0, 1e-9);
    EXPECT_NEAR(eval_ssim(a, b), eval_ssim(b, a), 1e-12);
    EXPECT_EQ(eval_ssim(a, b), ssim(tensor_cast<double>(a), tensor_cast<double>(b)));
}

TEST(Benchmark, ZeroWeightModelScoresItsConstantOutput) {
    TempDir d("bench_zero");
    const auto idx = small_dataset(d.path / "data");
    DeblurModel<float> m(ModelConfig::toy());
    m.fine->up.head.bias.value.fill(0.25f);
    const auto r = benchmark(m, idx);
    ASSERT_EQ(r.per_image.size(), 3u);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto pair = load_pair(idx.pairs[i]);
        const Tensor<float> flat(pair.sharp.shape(), 0.25f);
        EXPECT_EQ(r.per_image[i].psnr_db, psnr(flat, pair.sharp));
        EXPECT_EQ(r.per_image[i].input_psnr_db, psnr(pair.blurred, pair.sharp));
    }
}

TEST(Benchmark, MeansAndFiles) {
    TempDir d("bench_files");
    const auto idx = small_dataset(d.path / "data", 4);
    auto m = build_variant<float>(ModelConfig::toy(), 2);
    BenchmarkOptions opts;
    opts.out_dir = d.path / "out";
    opts.montage = true;
    opts.save_outputs = true;
    const auto r = benchmark(m, idx, opts);
    double p = 0, s = 0, t = 0;
    for (const auto& x : r.per_image) {
        p += x.psnr_db;
        s += x.ssim;
        t += x.infer_time_s;
    }
    EXPECT_NEAR(r.mean_psnr, p / 4, 1e-12);
    EXPECT_NEAR(r.mean_ssim, s / 4, 1e-12);
    EXPECT_NEAR(r.mean_time, t / 4, 1e-12);
    EXPECT_EQ(r.param_count, count_parameters(ModelConfig::toy()));
    EXPECT_EQ(r.fingerprint, fingerprint(ModelConfig::toy()));
    EXPECT_TRUE(fs::exists(opts.out_dir / "report.csv"));
    EXPECT_TRUE(fs::exists(opts.out_dir / "report.txt"));
    EXPECT_TRUE(fs::exists(opts.out_dir / "seq000_000000_montage.png"));
    EXPECT_TRUE(fs::exists(opts.out_dir / "seq000_000000_out.png"));
    EXPECT_EQ(read_png((opts.out_dir / "seq000_000000_montage.png").string()).w(), 3 * 20 + 2 * 4);
}

TEST(Benchmark, IdempotentMetricColumns) {
    TempDir d("bench_idem");
    const auto idx = small_dataset(d.path / "data");
    auto m = build_variant<float>(ModelConfig::toy(), 3);
    BenchmarkOptions a{d.path / "a"}, b{d.path / "b"};
    benchmark(m, idx, a);
    benchmark(m, idx, b);
    EXPECT_EQ(metric_columns(a.out_dir / "report.csv"), metric_columns(b.out_dir / "report.csv"));
}

TEST(Benchmark, UnreadableImagesAreSkippedWithWarning) {
    TempDir d("bench_bad");
    auto idx = small_dataset(d.path / "data");
    std::ofstream(idx.pairs[1].blur_path, std::ios::trunc) << "not a png";
    auto m = build_variant<float>(ModelConfig::toy(), 3);
    const auto r = benchmark(m, idx);
    EXPECT_EQ(r.per_image.size(), 2u);
    ASSERT_EQ(r.warnings.size(), 1u);
    EXPECT_NE(r.warnings[0].find(idx.pairs[1].source_id), std::string::npos);
    EXPECT_NE(format_report_table(r).find("warning"), std::string::npos);
}

TEST(Decompose, ZeroWeightModelGivesEqualConstants) {
    DeblurModel<float> m(ModelConfig::toy());
    m.fine->up.head.bias.value.fill(0.3f);
    const auto img = random_tensor<float>(1, 3, 16, 16, 1);
    const auto d = decompose(m, img);
    EXPECT_EQ(d.full, d.no_backbone);
    EXPECT_EQ(d.full, d.no_long_skip);
    for (float v : d.full.values()) EXPECT_EQ(v, 0.3f);
}

TEST(Decompose, ShapesAndBackboneMatters) {
    TempDir dir("decomp");
    auto m = build_variant<float>(ModelConfig::toy(), 5);
    const auto img = random_tensor<float>(1, 3, 18, 22, 2);
    const auto d = decompose(m, img, dir.path);
    for (const auto* t : {&d.input, &d.full, &d.no_backbone, &d.no_long_skip}) EXPECT_EQ(t->shape(), img.shape());
    EXPECT_NE(d.full, d.no_backbone);
    EXPECT_NE(d.full, d.no_long_skip);
    for (auto f : {"a_input.png", "b_full.png", "c_no_backbone.png", "d_no_long_skip.png"})
        EXPECT_TRUE(fs::exists(dir.path / f));
    // Options are restored afterwards.
    EXPECT_EQ(m.infer(img), d.full);
}

TEST(Montage, LaysPanelsSideBySide) {
    const auto a = random_tensor<float>(1, 3, 5, 6, 1), b = random_tensor<float>(1, 3, 5, 6, 2);
    const auto m = montage({a, b});
    EXPECT_EQ(m.shape(), (Shape{1, 3, 5, 16}));
    EXPECT_EQ(m(0, 1, 2, 3), a(0, 1, 2, 3));
    EXPECT_EQ(m(0, 2, 4, 10 + 5), b(0, 2, 4, 5));
    EXPECT_THROW(montage({a, random_tensor<float>(1, 3, 4, 6, 3)}), ContractError);
}
