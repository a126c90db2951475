#pragma once

// Configuration schema and the flat `section.key = value` config document.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace msdeblur {

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& what)
        : std::runtime_error(what), key_(std::move(key)) {}
    [[nodiscard]] const std::string& key() const { return key_; }

private:
    std::string key_;
};

enum class BackboneKind { rcan, edsr };
enum class DownscaleMode { learned, bicubic };
enum class ScaleVariant { multiscale, x1_x1_x1, x1_x2_x1, x1_x4_x1 };
enum class Preset { toy, paper };
enum class LossKind { mix, l1 };

namespace detail {

template <class E>
struct EnumNames;

template <>
struct EnumNames<BackboneKind> {
    static constexpr std::pair<BackboneKind, std::string_view> table[] = {{BackboneKind::rcan, "rcan"},
                                                                      {BackboneKind::edsr, "edsr"}};
};
template <>
struct EnumNames<DownscaleMode> {
    static constexpr std::pair<DownscaleMode, std::string_view> table[] = {
        {DownscaleMode::learned, "learned"}, {DownscaleMode::bicubic, "bicubic"}};
};
template <>
struct EnumNames<ScaleVariant> {
    static constexpr std::pair<ScaleVariant, std::string_view> table[] = {
        {ScaleVariant::multiscale, "multiscale"},
        {ScaleVariant::x1_x1_x1, "x1_x1_x1"},
        {ScaleVariant::x1_x2_x1, "x1_x2_x1"},
        {ScaleVariant::x1_x4_x1, "x1_x4_x1"}};
};
template <>
struct EnumNames<Preset> {
    static constexpr std::pair<Preset, std::string_view> table[] = {{Preset::toy, "toy"},
                                                                    {Preset::paper, "paper"}};
};
template <>
struct EnumNames<LossKind> {
    static constexpr std::pair<LossKind, std::string_view> table[] = {{LossKind::mix, "mix"},
                                                                      {LossKind::l1, "l1"}};
};

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

template <class E>
std::string_view enum_name(E v) {
    for (const auto& [e, name] : detail::EnumNames<E>::table)
        if (e == v) return name;
    return "?";
}

template <class E>
E parse_enum(const std::string& key, std::string_view text) {
    for (const auto& [e, name] : detail::EnumNames<E>::table)
        if (name == text) return e;
    throw ConfigError(key, "invalid value '" + std::string(text) + "' for key " + key);
}

struct ModelConfig {
    Preset preset = Preset::toy;
    BackboneKind backbone = BackboneKind::rcan;
    int channels = 16;
    int n_groups = 2;
    int n_blocks_per_group = 4;
    int ca_reduction = 4;
    DownscaleMode downscale_mode = DownscaleMode::learned;
    bool include_x1_path = false;
    ScaleVariant scale_variant = ScaleVariant::multiscale;

    // Desk-scale network: 2 groups x 4 blocks x 16 channels.
    static ModelConfig toy(BackboneKind b = BackboneKind::rcan) {
        ModelConfig c;
        c.preset = Preset::toy;
        c.backbone = b;
        return c;
    }

    // Full-size network. RCAN: 10 groups x 20 blocks at 64 channels per scale,
    // about 31M parameters in total. EDSR: one group of 32 blocks at 256
    // channels per scale, about 84M.
    static ModelConfig paper(BackboneKind b = BackboneKind::rcan) {
        ModelConfig c;
        c.preset = Preset::paper;
        c.backbone = b;
        if (b == BackboneKind::rcan) {
            c.channels = 64;
            c.n_groups = 10;
            c.n_blocks_per_group = 20;
            c.ca_reduction = 16;
        } else {
            c.channels = 256;
            c.n_groups = 1;
            c.n_blocks_per_group = 32;
            c.ca_reduction = 16;
        }
        return c;
    }

    static ModelConfig from_preset(Preset p, BackboneKind b) { return p == Preset::toy ? toy(b) : paper(b); }

    [[nodiscard]] bool multiscale() const { return scale_variant == ScaleVariant::multiscale; }
    // x1 path only exists on the two-scale network.
    [[nodiscard]] bool has_x1_path() const { return multiscale() && include_x1_path; }

    void validate() const {
        auto positive = [](const char* key, int v) {
            if (v <= 0) throw ConfigError(key, std::string(key) + " must be positive");
        };
        positive("model.channels", channels);
        positive("model.n_groups", n_groups);
        positive("model.n_blocks_per_group", n_blocks_per_group);
        positive("model.ca_reduction", ca_reduction);
        if (channels % ca_reduction != 0)
            throw ConfigError("model.ca_reduction", "model.channels (" + std::to_string(channels) +
                                                        ") must be divisible by model.ca_reduction (" +
                                                        std::to_string(ca_reduction) + ")");
    }

    // Canonical key/value listing; the fingerprint and checkpoints use it.
    [[nodiscard]] std::vector<std::pair<std::string, std::string>> entries() const {
        return {
            {"model.preset", std::string(enum_name(preset))},
            {"model.backbone", std::string(enum_name(backbone))},
            {"model.channels", std::to_string(channels)},
            {"model.n_groups", std::to_string(n_groups)},
            {"model.n_blocks_per_group", std::to_string(n_blocks_per_group)},
            {"model.ca_reduction", std::to_string(ca_reduction)},
            {"model.downscale_mode", std::string(enum_name(downscale_mode))},
            {"model.include_x1_path", include_x1_path ? "true" : "false"},
            {"model.scale_variant", std::string(enum_name(scale_variant))},
        };
    }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TrainConfig {
    double lr0 = 0.5e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int epochs = 1000;
    int lr_halving_period = 300;
    int batch_size = 8;
    int patch_size = 192;         // blurred input patch, both stages
    int coarse_patch_size = 96;   // x2 ground-truth patch for stage 1
    std::uint64_t seed = 0;
    double lambda_l1 = 0.22;
    double lambda_ss = 0.78;
    LossKind loss = LossKind::mix;
    int checkpoint_every = 50;
    int num_workers = 1;
    int steps_per_epoch = 0;      // 0: one pass over the dataset
    bool augment = true;

    void validate() const {
        if (!(lr0 > 0)) throw ConfigError("train.lr0", "train.lr0 must be > 0");
        if (!(beta1 > 0 && beta1 < 1)) throw ConfigError("train.beta1", "train.beta1 must be in (0,1)");
        if (!(beta2 > 0 && beta2 < 1)) throw ConfigError("train.beta2", "train.beta2 must be in (0,1)");
        if (!(epsilon > 0)) throw ConfigError("train.epsilon", "train.epsilon must be > 0");
        if (epochs < 0) throw ConfigError("train.epochs", "train.epochs must be >= 0");
        if (lr_halving_period <= 0)
            throw ConfigError("train.lr_halving_period", "train.lr_halving_period must be positive");
        if (batch_size <= 0) throw ConfigError("train.batch_size", "train.batch_size must be positive");
        if (patch_size <= 0 || patch_size % 8 != 0)
            throw ConfigError("train.patch_size", "train.patch_size must be a positive multiple of 8");
        if (coarse_patch_size * 2 != patch_size)
            throw ConfigError("train.coarse_patch_size", "train.coarse_patch_size must be half of train.patch_size");
        if (lambda_l1 < 0 || lambda_ss < 0 || lambda_l1 + lambda_ss <= 0)
            throw ConfigError("train.lambda_l1", "loss weights must be nonnegative and not both zero");
        if (checkpoint_every < 0)
            throw ConfigError("train.checkpoint_every", "train.checkpoint_every must be >= 0");
        if (num_workers <= 0) throw ConfigError("train.num_workers", "train.num_workers must be positive");
        if (steps_per_epoch < 0)
            throw ConfigError("train.steps_per_epoch", "train.steps_per_epoch must be >= 0");
    }

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EvalConfig {
    bool montage = false;
    bool save_outputs = false;

    friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};

struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    EvalConfig eval;

    void validate() const {
        model.validate();
        train.validate();
    }
};

namespace detail {

inline int parse_int(const std::string& key, const std::string& v) {
    int out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ConfigError(key, "invalid integer '" + v + "' for key " + key);
    return out;
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ConfigError(key, "invalid unsigned integer '" + v + "' for key " + key);
    return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(key, "invalid number '" + v + "' for key " + key);
    }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key, "invalid boolean '" + v + "' for key " + key);
}

inline std::string fmt_double(double d) {
    std::ostringstream os;
    os << std::setprecision(17) << d;
    return os.str();
}

}  // namespace detail

// Applies one `section.key = value` assignment. Unknown keys throw.
inline void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    using namespace detail;
    auto& m = cfg.model;
    auto& t = cfg.train;
    if (key == "model.preset") {
        // Presets reset the architecture fields; apply them before other model keys.
        const auto p = parse_enum<Preset>(key, value);
        m = ModelConfig::from_preset(p, m.backbone);
    } else if (key == "model.backbone") m.backbone = parse_enum<BackboneKind>(key, value);
    else if (key == "model.channels") m.channels = parse_int(key, value);
    else if (key == "model.n_groups") m.n_groups = parse_int(key, value);
    else if (key == "model.n_blocks_per_group") m.n_blocks_per_group = parse_int(key, value);
    else if (key == "model.ca_reduction") m.ca_reduction = parse_int(key, value);
    else if (key == "model.downscale_mode") m.downscale_mode = parse_enum<DownscaleMode>(key, value);
    else if (key == "model.include_x1_path") m.include_x1_path = parse_bool(key, value);
    else if (key == "model.scale_variant") m.scale_variant = parse_enum<ScaleVariant>(key, value);
    else if (key == "train.lr0") t.lr0 = parse_double(key, value);
    else if (key == "train.beta1") t.beta1 = parse_double(key, value);
    else if (key == "train.beta2") t.beta2 = parse_double(key, value);
    else if (key == "train.epsilon") t.epsilon = parse_double(key, value);
    else if (key == "train.epochs") t.epochs = parse_int(key, value);
    else if (key == "train.lr_halving_period") t.lr_halving_period = parse_int(key, value);
    else if (key == "train.batch_size") t.batch_size = parse_int(key, value);
    else if (key == "train.patch_size") t.patch_size = parse_int(key, value);
    else if (key == "train.coarse_patch_size") t.coarse_patch_size = parse_int(key, value);
    else if (key == "train.seed") t.seed = parse_u64(key, value);
    else if (key == "train.lambda_l1") t.lambda_l1 = parse_double(key, value);
    else if (key == "train.lambda_ss") t.lambda_ss = parse_double(key, value);
    else if (key == "train.loss") t.loss = parse_enum<LossKind>(key, value);
    else if (key == "train.checkpoint_every") t.checkpoint_every = parse_int(key, value);
    else if (key == "train.num_workers") t.num_workers = parse_int(key, value);
    else if (key == "train.steps_per_epoch") t.steps_per_epoch = parse_int(key, value);
    else if (key == "train.augment") t.augment = parse_bool(key, value);
    else if (key == "eval.montage") cfg.eval.montage = parse_bool(key, value);
    else if (key == "eval.save_outputs") cfg.eval.save_outputs = parse_bool(key, value);
    else throw ConfigError(key, "unknown config key '" + key + "'");
}

// Parses `key = value` lines; '#' starts a comment. model.backbone and
// model.preset are applied first so explicit keys override the preset.
inline RunConfig parse_config(std::string_view text, RunConfig base = {}) {
    std::vector<std::pair<std::string, std::string>> kv;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto t = detail::trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("", "config line " + std::to_string(lineno) + ": expected key = value");
        kv.emplace_back(detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
    }
    RunConfig cfg = base;
    for (const char* first : {"model.backbone", "model.preset"})
        for (const auto& [k, v] : kv)
            if (k == first) apply_config_key(cfg, k, v);
    for (const auto& [k, v] : kv)
        if (k != "model.backbone" && k != "model.preset") apply_config_key(cfg, k, v);
    cfg.validate();
    return cfg;
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
    std::ifstream f(path);
    if (!f) throw ConfigError("", "cannot read config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

inline std::string to_config_text(const RunConfig& cfg) {
    using detail::fmt_double;
    std::ostringstream os;
    for (const auto& [k, v] : cfg.model.entries()) os << k << " = " << v << "\n";
    const auto& t = cfg.train;
    os << "train.lr0 = " << fmt_double(t.lr0) << "\n"
       << "train.beta1 = " << fmt_double(t.beta1) << "\n"
       << "train.beta2 = " << fmt_double(t.beta2) << "\n"
       << "train.epsilon = " << fmt_double(t.epsilon) << "\n"
       << "train.epochs = " << t.epochs << "\n"
       << "train.lr_halving_period = " << t.lr_halving_period << "\n"
       << "train.batch_size = " << t.batch_size << "\n"
       << "train.patch_size = " << t.patch_size << "\n"
       << "train.coarse_patch_size = " << t.coarse_patch_size << "\n"
       << "train.seed = " << t.seed << "\n"
       << "train.lambda_l1 = " << fmt_double(t.lambda_l1) << "\n"
       << "train.lambda_ss = " << fmt_double(t.lambda_ss) << "\n"
       << "train.loss = " << enum_name(t.loss) << "\n"
       << "train.checkpoint_every = " << t.checkpoint_every << "\n"
       << "train.num_workers = " << t.num_workers << "\n"
       << "train.steps_per_epoch = " << t.steps_per_epoch << "\n"
       << "train.augment = " << (t.augment ? "true" : "false") << "\n"
       << "eval.montage = " << (cfg.eval.montage ? "true" : "false") << "\n"
       << "eval.save_outputs = " << (cfg.eval.save_outputs ? "true" : "false") << "\n";
    return os.str();
}

// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

inline std::string fingerprint(const ModelConfig& m) {
    std::string canon;
    for (const auto& [k, v] : m.entries()) canon += k + "=" + v + "\n";
    return hex64(fnv1a64(canon));
}

}  // namespace msdeblur
