#include <CLI11.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "msdeblur/msdeblur.hpp"

namespace fs = std::filesystem;
using namespace msdeblur;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw ImageIoError("cannot read " + p.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string sha1_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha1(), nullptr);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

// Git blob hash of each input file, combined over "<hash> <path>" lines the
// way a tree object lists its entries. Directories are walked in sorted order.
class InputHasher {
public:
    void add(const fs::path& p) {
        if (p.empty() || !fs::exists(p)) return;
        if (fs::is_directory(p)) {
            std::vector<fs::path> files;
            for (const auto& e : fs::recursive_directory_iterator(p))
                if (e.is_regular_file()) files.push_back(e.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) add_file(f, fs::relative(f, p.parent_path()).generic_string());
        } else {
            add_file(p, p.filename().generic_string());
        }
    }
    [[nodiscard]] std::string digest() const { return sha1_hex(listing_); }

private:
    void add_file(const fs::path& f, const std::string& label) {
        const std::string content = read_file(f);
        listing_ += sha1_hex("blob " + std::to_string(content.size()) + '\0' + content) + " " + label + "\n";
    }
    std::string listing_;
};

void write_manifest(const fs::path& out, const std::string& command, const std::vector<std::string>& argv,
                    std::uint64_t seed, const std::string& input_hash, const std::string& config_text) {
    fs::create_directories(out);
    std::ofstream os(out / "run_manifest.txt");
    os << "command " << command << "\n";
    os << "argv";
    for (const auto& a : argv) os << " " << a;
    os << "\n";
    os << "seed " << seed << "\n";
    os << "input_hash " << input_hash << "\n";
    os << "[config]\n" << config_text;
}

// Config file first, then --set key=value overrides, then dedicated flags.
RunConfig build_config(const std::string& path, const std::vector<std::string>& sets) {
    std::string text;
    if (!path.empty()) text = read_file(path) + "\n";
    for (const auto& s : sets) {
        if (s.find('=') == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
        text += s + "\n";
    }
    return parse_config(text);
}

std::vector<SamplePair<float>> load_training_data(const std::string& root) {
    const DatasetIndex idx = scan_dataset(root);
    for (const auto& w : idx.warnings) std::cerr << "warning: " << w << "\n";
    if (idx.size() == 0) throw ImageIoError("no image pairs found under " + root);
    return load_dataset(idx);
}

TrainOptions progress_options(const fs::path& out, int log_every) {
    TrainOptions opts;
    opts.out_dir = out;
    opts.on_step = [log_every](const StepInfo& s, DeblurModel<float>&) {
        if (log_every > 0 && s.step % log_every == 0)
            std::cerr << "stage " << s.stage << " epoch " << s.epoch << " step " << s.step << " loss " << s.loss
                      << "\n";
    };
    return opts;
}

struct Context {
    std::vector<std::string> argv;
};

// synth-data

struct SynthArgs {
    std::string out;
    SynthOptions opts;
    std::string tmpl = "shapes";
    bool force = false;
};

int run_synth(const SynthArgs& a, const Context& ctx) {
    const fs::path out = a.out;
    if (fs::exists(out) && !fs::is_empty(out)) {
        if (!a.force) throw UsageError("output directory " + out.string() + " is not empty (use --force)");
        // Only remove what an earlier run of this command would have written.
        for (const auto& e : fs::directory_iterator(out)) {
            const auto name = e.path().filename().string();
            if ((e.is_directory() && name.rfind("seq", 0) == 0) || name == "manifest.txt" ||
                name == "run_manifest.txt")
                fs::remove_all(e.path());
        }
    }
    SynthOptions o = a.opts;
    if (a.tmpl == "shapes") o.tmpl = SharpTemplate::shapes;
    else if (a.tmpl == "step") o.tmpl = SharpTemplate::step;
    else throw UsageError("unknown template '" + a.tmpl + "' (expected shapes or step)");
    parse_blur_kernel(o.kernel, o.sigma, o.seed);
    const auto ids = write_synthetic_dataset(out, o);

    std::ostringstream cfg;
    cfg << "synth.n_pairs = " << o.n_pairs << "\nsynth.height = " << o.height << "\nsynth.width = " << o.width
        << "\nsynth.kernel = " << o.kernel << "\nsynth.sigma = " << std::setprecision(17) << o.sigma
        << "\nsynth.frames_per_sequence = " << o.frames_per_sequence << "\nsynth.template = " << a.tmpl << "\n";
    write_manifest(out, "synth-data", ctx.argv, o.seed, sha1_hex(""), cfg.str());
    std::cout << "wrote " << ids.size() << " pairs to " << out.string() << "\n";
    return 0;
}

// train

struct TrainArgs {
    std::string config;
    std::vector<std::string> sets;
    int stage = 1;
    std::string resume;
    std::string stage1_ckpt;
    std::string data;
    std::string out;
    int epochs = -1;
    long long seed = -1;
    double lr0 = -1;
    int batch_size = -1;
    int num_workers = -1;
    int log_every = 0;
};

int run_train(const TrainArgs& a, const Context& ctx) {
    RunConfig cfg = build_config(a.config, a.sets);
    if (a.epochs >= 0) cfg.train.epochs = a.epochs;
    if (a.seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(a.seed);
    if (a.lr0 > 0) cfg.train.lr0 = a.lr0;
    if (a.batch_size > 0) cfg.train.batch_size = a.batch_size;
    if (a.num_workers > 0) cfg.train.num_workers = a.num_workers;
    cfg.validate();

    const bool multi = cfg.model.multiscale();
    if (a.stage == 2 && !multi) throw UsageError("single-scale variants train in one stage; use --stage 1");
    if (a.stage == 2 && a.stage1_ckpt.empty()) throw UsageError("stage 2 requires --stage1-ckpt");

    const auto data = load_training_data(a.data);
    const fs::path out = a.out;
    InputHasher hasher;
    if (!a.config.empty()) hasher.add(a.config);
    hasher.add(a.data);
    hasher.add(a.stage1_ckpt);
    hasher.add(a.resume);
    write_manifest(out, "train", ctx.argv, cfg.train.seed, hasher.digest(), to_config_text(cfg));

    const TrainOptions opts = progress_options(out, a.log_every);
    TrainResult r;
    if (!a.resume.empty()) {
        auto [state, model] = load_checkpoint(a.resume);
        check_config_match(model.config(), cfg.model);
        if (state.stage != a.stage)
            throw UsageError(a.resume + " holds a stage-" + std::to_string(state.stage) + " state, not stage " +
                             std::to_string(a.stage));
        r = a.stage == 1 ? train_stage1(model, data, cfg.train, opts, state)
                         : train_stage2(model, data, cfg.train, a.stage1_ckpt, opts, state);
    } else if (a.stage == 1) {
        DeblurModel<float> model(cfg.model, multi ? BuildScope::coarse_only : BuildScope::full);
        model.init(cfg.train.seed);
        r = train_stage1(model, data, cfg.train, opts);
    } else {
        DeblurModel<float> model(cfg.model);
        model.init(cfg.train.seed);
        r = train_stage2(model, data, cfg.train, a.stage1_ckpt, opts);
    }
    std::cout << "stage " << a.stage << ": " << r.state.epoch << " epochs, " << r.state.step << " steps";
    if (!r.log.empty()) std::cout << ", final loss " << r.log.back().loss;
    std::cout << "\n";
    return 0;
}

// eval

struct EvalArgs {
    std::string ckpt;
    std::string data;
    std::string out;
    bool montage = false;
    bool save_outputs = false;
};

DeblurModel<float> load_full_model(const std::string& path) {
    if (!fs::exists(path)) throw CheckpointError("checkpoint not found: " + path);
    auto [state, model] = load_checkpoint(path);
    if (model.multiscale() && !model.fine)
        throw UsageError(path + " holds only the coarse sub-network; evaluate a stage-2 checkpoint");
    return std::move(model);
}

int run_eval(const EvalArgs& a, const Context& ctx) {
    DeblurModel<float> model = load_full_model(a.ckpt);
    const DatasetIndex idx = scan_dataset(a.data);
    const fs::path out = a.out;
    InputHasher hasher;
    hasher.add(a.ckpt);
    hasher.add(a.data);
    RunConfig snapshot;
    snapshot.model = model.config();
    snapshot.eval.montage = a.montage;
    snapshot.eval.save_outputs = a.save_outputs;
    write_manifest(out, "eval", ctx.argv, 0, hasher.digest(), to_config_text(snapshot));

    BenchmarkOptions bo;
    bo.out_dir = out;
    bo.montage = a.montage;
    bo.save_outputs = a.save_outputs;
    const MetricsReport r = benchmark(model, idx, bo);
    std::cout << format_report_table(r);
    return 0;
}

// ablate

struct AblateArgs {
    std::string matrix;
    std::string config;
    std::vector<std::string> sets;
    std::string data;
    std::string train_data;
    std::string out;
    long long seed = -1;
    int log_every = 0;
};

struct MatrixRow {
    std::string name;
    std::vector<std::string> assignments;
};

// One row per line: "name: key=value key=value ...". '#' starts a comment.
std::vector<MatrixRow> parse_matrix(const std::string& text) {
    std::vector<MatrixRow> rows;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        const auto colon = line.find(':');
        std::istringstream probe(line);
        std::string first;
        if (!(probe >> first)) continue;
        if (colon == std::string::npos)
            throw ConfigError("", "config matrix line " + std::to_string(lineno) + ": expected 'name: key=value ...'");
        MatrixRow row;
        std::istringstream name(line.substr(0, colon));
        name >> row.name;
        if (row.name.empty()) throw ConfigError("", "config matrix line " + std::to_string(lineno) + ": empty name");
        std::istringstream rest(line.substr(colon + 1));
        for (std::string tok; rest >> tok;) {
            if (tok.find('=') == std::string::npos)
                throw ConfigError("", "config matrix line " + std::to_string(lineno) + ": expected key=value, got '" +
                                          tok + "'");
            row.assignments.push_back(tok);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ConfigError("", "config matrix has no rows");
    return rows;
}

struct AblationResult {
    std::string name;
    MetricsReport report;
};

std::string format_ablation(const std::vector<AblationResult>& rows) {
    std::ostringstream os;
    os << std::left << std::setw(16) << "config" << std::right << std::setw(12) << "PSNR(dB)" << std::setw(10) << "SSIM"
       << std::setw(12) << "Time(s)" << std::setw(12) << "Param" << "\n";
    for (const auto& r : rows)
        os << std::left << std::setw(16) << r.name << std::right << std::setw(12) << std::fixed << std::setprecision(3)
           << r.report.mean_psnr << std::setw(10) << std::setprecision(4) << r.report.mean_ssim << std::setw(12)
           << r.report.mean_time << std::setw(12) << r.report.param_count << "\n";
    return os.str();
}

int run_ablate(const AblateArgs& a, const Context& ctx) {
    const RunConfig base = build_config(a.config, a.sets);
    const auto rows = parse_matrix(read_file(a.matrix));
    std::vector<RunConfig> configs;
    for (const auto& row : rows) {
        std::string text;
        for (const auto& kv : row.assignments) text += kv + "\n";
        RunConfig c = parse_config(text, base);
        if (a.seed >= 0) c.train.seed = static_cast<std::uint64_t>(a.seed);
        configs.push_back(c);
    }
    const DatasetIndex eval_idx = scan_dataset(a.data);
    std::vector<SamplePair<float>> train_data;
    if (!a.train_data.empty()) train_data = load_training_data(a.train_data);
    else std::cerr << "warning: no --train-data given; evaluating freshly initialized models\n";

    const fs::path out = a.out;
    InputHasher hasher;
    hasher.add(a.matrix);
    if (!a.config.empty()) hasher.add(a.config);
    hasher.add(a.data);
    hasher.add(a.train_data);
    std::string snapshot = to_config_text(base);
    for (const auto& row : rows) {
        snapshot += "[row " + row.name + "]";
        for (const auto& kv : row.assignments) snapshot += " " + kv;
        snapshot += "\n";
    }
    write_manifest(out, "ablate", ctx.argv, configs.front().train.seed, hasher.digest(), snapshot);

    std::vector<AblationResult> results;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const RunConfig& c = configs[i];
        const fs::path row_dir = out / rows[i].name;
        std::cerr << "ablate: " << rows[i].name << " (" << count_parameters(c.model) << " parameters)\n";
        DeblurModel<float> model(c.model);
        model.init(c.train.seed);
        if (!train_data.empty()) {
            const TrainOptions opts = progress_options(row_dir, a.log_every);
            if (c.model.multiscale()) {
                DeblurModel<float> coarse(c.model, BuildScope::coarse_only);
                coarse.init(c.train.seed);
                train_stage1(coarse, train_data, c.train, opts);
                train_stage2(model, train_data, c.train, row_dir / "stage1_last.ckpt", opts);
            } else {
                train_stage1(model, train_data, c.train, opts);
            }
        }
        BenchmarkOptions bo;
        bo.out_dir = row_dir / "eval";
        results.push_back({rows[i].name, benchmark(model, eval_idx, bo)});
    }

    const std::string table = format_ablation(results);
    std::ofstream(out / "ablation.txt") << table;
    std::ofstream csv(out / "ablation.csv");
    csv << "config,psnr_db,ssim,time_s,params\n";
    for (const auto& r : results)
        csv << r.name << "," << std::setprecision(10) << r.report.mean_psnr << "," << r.report.mean_ssim << ","
            << r.report.mean_time << "," << r.report.param_count << "\n";
    std::cout << table;
    return 0;
}

// count-params

struct CountArgs {
    std::string config;
    std::vector<std::string> sets;
    std::string out;
};

int run_count(const CountArgs& a, const Context& ctx) {
    const RunConfig cfg = build_config(a.config, a.sets);
    const std::size_t n = count_parameters(cfg.model);
    if (!a.out.empty()) {
        InputHasher hasher;
        if (!a.config.empty()) hasher.add(a.config);
        write_manifest(a.out, "count-params", ctx.argv, cfg.train.seed, hasher.digest(), to_config_text(cfg));
    }
    std::cout << n << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-scale residual deblurring: data synthesis, training, evaluation"};
    app.require_subcommand(1);
    Context ctx;
    for (int i = 1; i < argc; ++i) ctx.argv.emplace_back(argv[i]);

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth-data", "Write a synthetic blurred/sharp dataset");
    synth->add_option("--out", sa.out, "Output directory")->required();
    synth->add_option("--n-pairs", sa.opts.n_pairs, "Number of pairs")->capture_default_str();
    synth->add_option("--kernel", sa.opts.kernel,
                      "Blur kernel: delta, boxK, gauss:S, motion:L:A or nonuniform")->capture_default_str();
    synth->add_option("--sigma", sa.opts.sigma, "Gaussian noise standard deviation")->capture_default_str();
    synth->add_option("--seed", sa.opts.seed, "Random seed")->capture_default_str();
    synth->add_option("--height", sa.opts.height, "Image height")->capture_default_str();
    synth->add_option("--width", sa.opts.width, "Image width")->capture_default_str();
    synth->add_option("--frames-per-seq", sa.opts.frames_per_sequence, "Frames per sequence directory")
        ->capture_default_str();
    synth->add_option("--template", sa.tmpl, "Sharp content: shapes or step")->capture_default_str();
    synth->add_flag("--force", sa.force, "Overwrite a non-empty output directory");

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Train stage 1 (coarse) or stage 2 (fine, coarse frozen)");
    train->add_option("--config", ta.config, "Config file (key = value lines)");
    train->add_option("--set", ta.sets, "Config override key=value (repeatable)");
    train->add_option("--stage", ta.stage, "Training stage")->check(CLI::IsMember({1, 2}))->capture_default_str();
    train->add_option("--resume", ta.resume, "Checkpoint to resume from");
    train->add_option("--stage1-ckpt", ta.stage1_ckpt, "Stage-1 checkpoint (required for stage 2)");
    train->add_option("--data", ta.data, "Training dataset root")->required();
    train->add_option("--out", ta.out, "Output directory")->required();
    train->add_option("--epochs", ta.epochs, "Overrides train.epochs");
    train->add_option("--seed", ta.seed, "Overrides train.seed");
    train->add_option("--lr0", ta.lr0, "Overrides train.lr0");
    train->add_option("--batch-size", ta.batch_size, "Overrides train.batch_size");
    train->add_option("--num-workers", ta.num_workers, "Overrides train.num_workers");
    train->add_option("--log-every", ta.log_every, "Print the loss every N steps (0: off)");

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "Benchmark a trained checkpoint on a paired dataset");
    eval->add_option("--ckpt", ea.ckpt, "Checkpoint")->required();
    eval->add_option("--data", ea.data, "Dataset root")->required();
    eval->add_option("--out", ea.out, "Output directory")->required();
    eval->add_flag("--montage", ea.montage, "Write blurred|output|sharp strips");
    eval->add_flag("--save-outputs", ea.save_outputs, "Write deblurred images");

    AblateArgs aa;
    auto* ablate = app.add_subcommand("ablate", "Train and benchmark each row of a config matrix");
    ablate->add_option("--config-matrix", aa.matrix, "Rows of 'name: key=value ...'")->required();
    ablate->add_option("--config", aa.config, "Base config shared by all rows");
    ablate->add_option("--set", aa.sets, "Base config override key=value (repeatable)");
    ablate->add_option("--data", aa.data, "Evaluation dataset root")->required();
    ablate->add_option("--train-data", aa.train_data, "Training dataset root");
    ablate->add_option("--out", aa.out, "Output directory")->required();
    ablate->add_option("--seed", aa.seed, "Overrides train.seed for every row");
    ablate->add_option("--log-every", aa.log_every, "Print the loss every N steps (0: off)");

    CountArgs ca;
    auto* count = app.add_subcommand("count-params", "Print the parameter count of a config");
    count->add_option("--config", ca.config, "Config file");
    count->add_option("--set", ca.sets, "Config override key=value (repeatable)");
    count->add_option("--out", ca.out, "Directory for the run manifest");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*synth) return run_synth(sa, ctx);
        if (*train) return run_train(ta, ctx);
        if (*eval) return run_eval(ea, ctx);
        if (*ablate) return run_ablate(aa, ctx);
        if (*count) return run_count(ca, ctx);
    } catch (const ConfigError& e) {
        std::cerr << "config error";
        if (!e.key().empty()) std::cerr << " [" << e.key() << "]";
        std::cerr << ": " << e.what() << "\n";
        return kExitUsage;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
