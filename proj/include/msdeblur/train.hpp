#pragma once

// Two-stage modular training: stage 1 fits the coarse sub-network to x2
// bicubic targets, stage 2 freezes it and fits the fine sub-network to the
// full-resolution targets. Adam with step-halving schedule, per-epoch CSV
// loss log, and versioned binary checkpoints.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "msdeblur/config.hpp"
#include "msdeblur/data.hpp"
#include "msdeblur/loss.hpp"
#include "msdeblur/model.hpp"

namespace msdeblur {

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
public:
    CheckpointError(const std::string& what, std::string key = {})
        : std::runtime_error(what), key_(std::move(key)) {}
    // Config key responsible for a mismatch, if any.
    [[nodiscard]] const std::string& key() const { return key_; }

private:
    std::string key_;
};

// lr0 * 0.5^floor(epoch / period)
inline double lr_at(const TrainConfig& cfg, int epoch) {
    require(epoch >= 0, "lr_at: epoch must be >= 0");
    return cfg.lr0 * std::pow(0.5, epoch / cfg.lr_halving_period);
}

inline double lr_at(int epoch) { return lr_at(TrainConfig{}, epoch); }

struct TrainState {
    int stage = 1;
    int epoch = 0;            // completed epochs
    std::int64_t step = 0;    // completed optimizer steps (Adam t)
    std::uint64_t seed = 0;
    std::string rng_state;    // epoch-order shuffling stream
    double best_loss = std::numeric_limits<double>::infinity();
    std::map<std::string, Tensor<float>> adam_m;
    std::map<std::string, Tensor<float>> adam_v;
};

struct EpochRecord {
    int stage = 1;
    int epoch = 0;
    std::int64_t step = 0;
    double lr = 0;
    double loss = 0;
    double l1_term = 0;
    double ssim_term = 0;
    double wall_time_s = 0;
};

inline constexpr const char* kLossLogHeader = "stage,epoch,step,lr,loss,l1_term,ssim_term,wall_time_s";

inline std::string to_csv_row(const EpochRecord& r) {
    std::ostringstream os;
    os << r.stage << "," << r.epoch << "," << r.step << "," << std::setprecision(10) << r.lr << ","
       << std::setprecision(12) << r.loss << "," << r.l1_term << "," << r.ssim_term << "," << std::setprecision(6)
       << r.wall_time_s;
    return os.str();
}

struct StepInfo {
    int stage = 1;
    int epoch = 0;
    std::int64_t step = 0;
    double loss = 0;
};

struct TrainOptions {
    std::filesystem::path out_dir;   // empty: no files written
    bool write_checkpoints = true;
    // Called after every optimizer step with the model in its updated state.
    std::function<void(const StepInfo&, DeblurModel<float>&)> on_step;
    // Called after each stage-2 backward pass, before the update.
    std::function<void(DeblurModel<float>&)> after_backward;
};

struct TrainResult {
    TrainState state;
    std::vector<EpochRecord> log;
};

using NamedParams = std::vector<std::pair<std::string, Parameter<float>*>>;

template <class Visit>
NamedParams collect_params(Visit&& visit) {
    NamedParams out;
    visit([&](const std::string& name, Parameter<float>& p) { out.emplace_back(name, &p); });
    return out;
}

// Bias-corrected Adam step over `params`; advances state.step.
inline void adam_update(const NamedParams& params, TrainState& state, const TrainConfig& cfg, double lr) {
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    const float b1 = static_cast<float>(cfg.beta1);
    const float b2 = static_cast<float>(cfg.beta2);
    const float step_size = static_cast<float>(lr / bc1);
    const float inv_sqrt_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));
    const float eps = static_cast<float>(cfg.epsilon);
    for (const auto& [name, p] : params) {
        Tensor<float>& m = state.adam_m.try_emplace(name, p->value.shape()).first->second;
        Tensor<float>& v = state.adam_v.try_emplace(name, p->value.shape()).first->second;
        for (std::size_t i = 0; i < p->size(); ++i) {
            const float g = p->grad[i];
            m[i] = b1 * m[i] + (1 - b1) * g;
            v[i] = b2 * v[i] + (1 - b2) * g * g;
            p->value[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_bc2 + eps);
        }
    }
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Layout (all integers little-endian):
//   text header, one "key value" per line:
//     MSDEBLUR-CHECKPOINT <version>
//     fingerprint <16 hex digits>
//     stage / epoch / step / seed / best_loss
//     config <model key> <value>            (one line per model key)
//     rng <engine state>
//     blocks <count>
//     end
//   then <count> blocks:
//     u32 name length, name bytes, i32 n, c, h, w, u64 element count,
//     float32 values
// Block names: "param/<name>", "adam_m/<name>", "adam_v/<name>", sorted.
// ---------------------------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    ModelConfig model;
    std::string fingerprint;
    TrainState state;
    std::map<std::string, Tensor<float>> params;
};

namespace detail {

template <class I>
void put(std::ostream& os, I v) {
    unsigned char b[sizeof(I)];
    for (std::size_t i = 0; i < sizeof(I); ++i) b[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), sizeof(I));
}

template <class I>
I get(std::istream& is) {
    unsigned char b[sizeof(I)];
    if (!is.read(reinterpret_cast<char*>(b), sizeof(I))) throw CheckpointError("truncated checkpoint");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(I); ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return static_cast<I>(v);
}

inline void put_block(std::ostream& os, const std::string& name, const Tensor<float>& t) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    for (int d : {t.n(), t.c(), t.h(), t.w()}) put<std::int32_t>(os, d);
    put<std::uint64_t>(os, t.size());
    for (float f : t.values()) {
        std::uint32_t bits;
        std::memcpy(&bits, &f, sizeof bits);
        put<std::uint32_t>(os, bits);
    }
}

inline std::pair<std::string, Tensor<float>> get_block(std::istream& is) {
    const auto len = get<std::uint32_t>(is);
    if (len > (1u << 16)) throw CheckpointError("corrupt checkpoint block name");
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw CheckpointError("truncated checkpoint");
    Shape s{get<std::int32_t>(is), get<std::int32_t>(is), get<std::int32_t>(is), get<std::int32_t>(is)};
    const auto count = get<std::uint64_t>(is);
    if (s.n <= 0 || s.c <= 0 || s.h <= 0 || s.w <= 0 || count != s.size())
        throw CheckpointError("corrupt checkpoint block " + name);
    Tensor<float> t(s);
    for (auto& f : t.values()) {
        const auto bits = get<std::uint32_t>(is);
        std::memcpy(&f, &bits, sizeof f);
    }
    return {std::move(name), std::move(t)};
}

inline std::string fmt17(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, const TrainState& state, DeblurModel<float>& model) {
    std::map<std::string, const Tensor<float>*> blocks;
    model.visit([&](const std::string& name, Parameter<float>& p) { blocks["param/" + name] = &p.value; });
    for (const auto& [k, t] : state.adam_m) blocks["adam_m/" + k] = &t;
    for (const auto& [k, t] : state.adam_v) blocks["adam_v/" + k] = &t;

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw CheckpointError("cannot write checkpoint " + path.string());
        os << "MSDEBLUR-CHECKPOINT " << kCheckpointVersion << "\n"
           << "fingerprint " << fingerprint(model.config()) << "\n"
           << "stage " << state.stage << "\n"
           << "epoch " << state.epoch << "\n"
           << "step " << state.step << "\n"
           << "seed " << state.seed << "\n"
           << "best_loss " << detail::fmt17(state.best_loss) << "\n";
        for (const auto& [k, v] : model.config().entries()) os << "config " << k << " " << v << "\n";
        os << "rng " << state.rng_state << "\n"
           << "blocks " << blocks.size() << "\n"
           << "end\n";
        for (const auto& [name, t] : blocks) detail::put_block(os, name, *t);
        if (!os) throw CheckpointError("failed writing checkpoint " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open checkpoint " + path.string());
    Checkpoint ck;
    std::string line;
    if (!std::getline(is, line) || line.rfind("MSDEBLUR-CHECKPOINT ", 0) != 0)
        throw CheckpointError(path.string() + " is not a checkpoint file");
    const int version = std::stoi(line.substr(20));
    if (version != kCheckpointVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                              std::to_string(kCheckpointVersion) + ")");
    RunConfig rc;
    std::size_t n_blocks = 0;
    bool ended = false;
    while (std::getline(is, line)) {
        if (line == "end") {
            ended = true;
            break;
        }
        const auto sp = line.find(' ');
        const std::string key = line.substr(0, sp);
        const std::string val = sp == std::string::npos ? "" : line.substr(sp + 1);
        if (key == "fingerprint") ck.fingerprint = val;
        else if (key == "stage") ck.state.stage = std::stoi(val);
        else if (key == "epoch") ck.state.epoch = std::stoi(val);
        else if (key == "step") ck.state.step = std::stoll(val);
        else if (key == "seed") ck.state.seed = std::stoull(val);
        else if (key == "best_loss") ck.state.best_loss = val == "inf" ? std::numeric_limits<double>::infinity() : std::stod(val);
        else if (key == "config") {
            const auto sp2 = val.find(' ');
            apply_config_key(rc, val.substr(0, sp2), val.substr(sp2 + 1));
        } else if (key == "rng") ck.state.rng_state = val;
        else if (key == "blocks") n_blocks = std::stoull(val);
        else throw CheckpointError("unknown checkpoint header field '" + key + "'");
    }
    if (!ended) throw CheckpointError("checkpoint header not terminated");
    ck.model = rc.model;
    if (fingerprint(ck.model) != ck.fingerprint)
        throw CheckpointError("checkpoint fingerprint does not match its stored config");
    for (std::size_t i = 0; i < n_blocks; ++i) {
        auto [name, t] = detail::get_block(is);
        if (name.rfind("param/", 0) == 0) ck.params.emplace(name.substr(6), std::move(t));
        else if (name.rfind("adam_m/", 0) == 0) ck.state.adam_m.emplace(name.substr(7), std::move(t));
        else if (name.rfind("adam_v/", 0) == 0) ck.state.adam_v.emplace(name.substr(7), std::move(t));
        else throw CheckpointError("unknown checkpoint block " + name);
    }
    return ck;
}

// Throws a CheckpointError naming the first differing model key.
inline void check_config_match(const ModelConfig& stored, const ModelConfig& expected) {
    const auto a = stored.entries();
    const auto b = expected.entries();
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].second != b[i].second)
            throw CheckpointError("checkpoint config mismatch for " + a[i].first + ": checkpoint has '" +
                                      a[i].second + "', model has '" + b[i].second + "'",
                                  a[i].first);
}

// Copies checkpoint parameters into `model`. With `require_all`, every model
// parameter must be present; otherwise only the coarse ones are required.
inline void apply_checkpoint(const Checkpoint& ck, DeblurModel<float>& model, bool require_all = true) {
    check_config_match(ck.model, model.config());
    model.visit([&](const std::string& name, Parameter<float>& p) {
        auto it = ck.params.find(name);
        if (it == ck.params.end()) {
            if (require_all || name.rfind("coarse.", 0) == 0)
                throw CheckpointError("checkpoint lacks parameter " + name);
            return;
        }
        if (it->second.shape() != p.value.shape())
            throw CheckpointError("checkpoint parameter " + name + " has shape " + to_string(it->second.shape()));
        p.value = it->second;
    });
}

// Rebuilds the model stored in a checkpoint. Stage-1 checkpoints of
// multi-scale models usually hold only the coarse sub-network.
inline std::pair<TrainState, DeblurModel<float>> load_checkpoint(const std::filesystem::path& path) {
    Checkpoint ck = read_checkpoint(path);
    const bool coarse_only = ck.model.multiscale() && std::all_of(ck.params.begin(), ck.params.end(), [](const auto& kv) {
                                 return kv.first.rfind("coarse.", 0) == 0;
                             });
    DeblurModel<float> model(ck.model, coarse_only ? BuildScope::coarse_only : BuildScope::full);
    apply_checkpoint(ck, model);
    return {std::move(ck.state), std::move(model)};
}

// Loads into an existing model, enforcing its config.
inline TrainState load_checkpoint(const std::filesystem::path& path, DeblurModel<float>& model) {
    Checkpoint ck = read_checkpoint(path);
    apply_checkpoint(ck, model);
    return std::move(ck.state);
}

inline std::uint64_t hash_params(const NamedParams& params) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [name, p] : params) {
        h = fnv1a64(name, h);
        h = fnv1a64(std::string_view(reinterpret_cast<const char*>(p->value.data()), p->size() * sizeof(float)), h);
    }
    return h;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace detail {

struct Batch {
    Tensor<float> input;
    Tensor<float> target;
};

// Patches for one step. Each item's augmentation seed depends only on
// (seed, step, slot), so the batch is the same for any worker count.
inline Batch make_batch(const std::vector<SamplePair<float>>& data, const std::vector<int>& indices,
                        const TrainConfig& cfg, std::int64_t step, bool coarse_target) {
    const int b = static_cast<int>(indices.size());
    std::vector<Tensor<float>> in(b), tg(b);
    PatchSpec spec{cfg.patch_size, cfg.coarse_patch_size, true, cfg.augment, cfg.augment};
    auto work = [&](int lo, int hi) {
        for (int j = lo; j < hi; ++j) {
            const auto seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(j));
            auto [blur, sharp] = sample_patch(data[indices[j]], cfg.patch_size, seed, spec);
            in[j] = std::move(blur);
            tg[j] = coarse_target ? make_coarse_gt(sharp) : std::move(sharp);
        }
    };
    const int workers = std::min(cfg.num_workers, b);
    if (workers <= 1) {
        work(0, b);
    } else {
        std::vector<std::future<void>> jobs;
        for (int w = 0; w < workers; ++w)
            jobs.push_back(std::async(std::launch::async, work, b * w / workers, b * (w + 1) / workers));
        for (auto& j : jobs) j.get();
    }
    return {stack_batch(in), stack_batch(tg)};
}

inline LossTerms<float> training_loss(const Tensor<float>& out, const Tensor<float>& target, const TrainConfig& cfg,
                                      Tensor<float>* grad) {
    LossWeights w;
    w.lambda_l1 = cfg.lambda_l1;
    w.lambda_ss = cfg.lambda_ss;
    if (cfg.loss == LossKind::mix) return mix_loss(out, target, w, {}, grad);
    LossTerms<float> t;
    t.l1 = l1_loss(out, target, grad);
    t.ss = msssim_loss(out, target, w);
    t.total = t.l1;
    return t;
}

inline bool finite(const LossTerms<float>& t) {
    return std::isfinite(t.total) && std::isfinite(t.l1) && std::isfinite(t.ss);
}

inline void append_log(const std::filesystem::path& out_dir, const EpochRecord& r) {
    if (out_dir.empty()) return;
    std::filesystem::create_directories(out_dir);
    const auto path = out_dir / "loss_log.csv";
    const bool fresh = !std::filesystem::exists(path);
    std::ofstream os(path, std::ios::app);
    if (fresh) os << kLossLogHeader << "\n";
    os << to_csv_row(r) << "\n";
}

}  // namespace detail

// Runs epochs [state.epoch, cfg.epochs) of the given stage. Stage 1 updates
// the coarse sub-network (or the whole single-scale network); stage 2
// updates everything except the coarse sub-network, whose output is
// computed without gradient tracking.
inline TrainResult run_stage(int stage, DeblurModel<float>& model, const std::vector<SamplePair<float>>& data,
                             const TrainConfig& cfg, const TrainOptions& opts, TrainState state) {
    cfg.validate();
    require(!data.empty(), "training needs at least one sample pair");
    const bool multi = model.multiscale();
    if (stage == 2) {
        require(multi, "stage 2 applies to multi-scale models only");
        require(model.fine.has_value(), "stage 2 needs a full model (fine sub-network missing)");
    }
    require(model.config().multiscale() || stage == 1, "single-scale variants train in one stage");

    const NamedParams trainable = stage == 1 && multi ? collect_params([&](auto f) { model.visit_coarse(f); })
                                                      : collect_params([&](auto f) { model.visit_fine(f); });
    const NamedParams frozen = stage == 2 ? collect_params([&](auto f) { model.visit_coarse(f); }) : NamedParams{};

    state.stage = stage;
    state.seed = cfg.seed;
    Rng order_rng(derive_seed(cfg.seed, 0x6f72646572ULL, static_cast<std::uint64_t>(stage)));
    if (!state.rng_state.empty()) order_rng.set_state(state.rng_state);

    const int n = static_cast<int>(data.size());
    const int steps = cfg.steps_per_epoch > 0 ? cfg.steps_per_epoch : (n + cfg.batch_size - 1) / cfg.batch_size;
    const auto t0 = std::chrono::steady_clock::now();
    TrainResult result;

    for (int epoch = state.epoch; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at(cfg, epoch);
        std::vector<int> order(n);
        for (int i = 0; i < n; ++i) order[i] = i;
        for (int i = n - 1; i > 0; --i) std::swap(order[i], order[order_rng.below(i + 1)]);

        double sum_loss = 0, sum_l1 = 0, sum_ss = 0;
        for (int s = 0; s < steps; ++s) {
            std::vector<int> idx(cfg.batch_size);
            for (int j = 0; j < cfg.batch_size; ++j) idx[j] = order[(s * cfg.batch_size + j) % n];
            const bool coarse_target = stage == 1 && multi;
            detail::Batch batch = detail::make_batch(data, idx, cfg, state.step, coarse_target);

            model.zero_grad();
            Tensor<float> grad;
            LossTerms<float> terms;
            if (!multi) {
                Tensor<float> out = model.single->forward(batch.input);
                terms = detail::training_loss(out, batch.target, cfg, &grad);
                if (detail::finite(terms)) model.single->backward(grad);
            } else if (stage == 1) {
                Tensor<float> out = model.coarse_forward(batch.input);
                terms = detail::training_loss(out, batch.target, cfg, &grad);
                if (detail::finite(terms)) model.coarse->backward(grad);
            } else {
                Tensor<float> coarse;
                {
                    NoGradGuard no_grad;
                    coarse = model.coarse_forward(batch.input);
                }
                Tensor<float> out = model.fine_forward(batch.input, coarse);
                terms = detail::training_loss(out, batch.target, cfg, &grad);
                if (detail::finite(terms)) model.fine_backward(grad);
            }
            if (!detail::finite(terms)) {
                std::string where;
                if (!opts.out_dir.empty()) {
                    std::filesystem::create_directories(opts.out_dir);
                    for (int j = 0; j < batch.input.n(); ++j)
                        write_png((opts.out_dir / ("nonfinite_batch_" + std::to_string(j) + ".png")).string(),
                                  batch.input, j);
                    where = "; last batch saved under " + opts.out_dir.string();
                }
                throw TrainingError("non-finite loss at stage " + std::to_string(stage) + " epoch " +
                                    std::to_string(epoch) + " step " + std::to_string(state.step) + where);
            }
            if (stage == 2) {
                if (opts.after_backward) opts.after_backward(model);
                for (const auto& [name, p] : frozen)
                    for (float g : p->grad.values())
                        if (g != 0.0f) throw TrainingError("gradient reached frozen parameter " + name);
            }
            adam_update(trainable, state, cfg, lr);
            sum_loss += terms.total;
            sum_l1 += terms.l1;
            sum_ss += terms.ss;
            if (opts.on_step) opts.on_step({stage, epoch, state.step, static_cast<double>(terms.total)}, model);
        }

        state.epoch = epoch + 1;
        state.rng_state = order_rng.state();
        EpochRecord rec{stage, epoch, state.step, lr, sum_loss / steps, sum_l1 / steps, sum_ss / steps,
                        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
        result.log.push_back(rec);
        detail::append_log(opts.out_dir, rec);

        if (!opts.out_dir.empty() && opts.write_checkpoints) {
            const std::string prefix = "stage" + std::to_string(stage) + "_";
            if (rec.loss < state.best_loss) {
                state.best_loss = rec.loss;
                save_checkpoint(opts.out_dir / (prefix + "best.ckpt"), state, model);
            }
            if (cfg.checkpoint_every > 0 && state.epoch % cfg.checkpoint_every == 0)
                save_checkpoint(opts.out_dir / (prefix + "epoch" + std::to_string(state.epoch) + ".ckpt"), state,
                                model);
            save_checkpoint(opts.out_dir / (prefix + "last.ckpt"), state, model);
        } else {
            state.best_loss = std::min(state.best_loss, rec.loss);
        }
    }
    result.state = std::move(state);
    return result;
}

// Stage 1 from scratch (or resumed from a stage-1 state).
inline TrainResult train_stage1(DeblurModel<float>& model, const std::vector<SamplePair<float>>& data,
                                const TrainConfig& cfg, const TrainOptions& opts = {},
                                std::optional<TrainState> resume = {}) {
    TrainState st;
    if (resume) {
        require(resume->stage == 1, "cannot resume stage 1 from a stage-2 state");
        st = std::move(*resume);
    }
    return run_stage(1, model, data, cfg, opts, std::move(st));
}

// Loads and freezes the coarse sub-network from a stage-1 checkpoint, then
// trains the rest. `resume` continues an interrupted stage-2 run (its state
// and weights must already be loaded into `model`).
inline TrainResult train_stage2(DeblurModel<float>& model, const std::vector<SamplePair<float>>& data,
                                const TrainConfig& cfg, const std::filesystem::path& stage1_ckpt,
                                const TrainOptions& opts = {}, std::optional<TrainState> resume = {}) {
    if (stage1_ckpt.empty() || !std::filesystem::exists(stage1_ckpt))
        throw CheckpointError("stage 2 requires a stage-1 checkpoint; not found: " + stage1_ckpt.string());
    Checkpoint ck = read_checkpoint(stage1_ckpt);
    if (ck.state.stage != 1) throw CheckpointError(stage1_ckpt.string() + " is not a stage-1 checkpoint");
    TrainState st;
    if (resume) {
        require(resume->stage == 2, "cannot resume stage 2 from a stage-1 state");
        st = std::move(*resume);
        // The resumed model already carries the frozen coarse weights; they
        // must still match the stage-1 result.
        check_config_match(ck.model, model.config());
    } else {
        apply_checkpoint(ck, model, /*require_all=*/false);
    }
    return run_stage(2, model, data, cfg, opts, std::move(st));
}

}  // namespace msdeblur
