#include "xaichest/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include "xaichest/rng.hpp"

namespace xaichest::harness {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Hashing

std::string fnv1a_hex(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string file_checksum(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string bytes = ss.str();
    return fnv1a_hex(bytes.data(), bytes.size());
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

const json* lookup(const json& root, const std::string& dotted) {
    const json* cur = &root;
    std::size_t start = 0;
    while (start <= dotted.size()) {
        std::size_t dot = dotted.find('.', start);
        std::string key = dotted.substr(start, dot == std::string::npos ? dot : dot - start);
        if (!cur->is_object() || !cur->contains(key)) return nullptr;
        cur = &(*cur)[key];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    return cur;
}

template <typename T>
T fetch(const json& root, const std::string& path, const T& fallback) {
    const json* p = lookup(root, path);
    if (!p) return fallback;
    try {
        return p->get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config error at " + path + ": wrong type");
    }
}

[[noreturn]] void bad_value(const std::string& path, const std::string& what) {
    throw ConfigError("config error at " + path + ": " + what);
}

Modulation parse_modulation(const std::string& s) {
    if (s == "QPSK") return Modulation::Qpsk;
    if (s == "16QAM" || s == "QAM16") return Modulation::Qam16;
    if (s == "64QAM" || s == "QAM64") return Modulation::Qam64;
    bad_value("modulation", "unknown scheme '" + s + "'");
}

ProfileKind parse_profile(const std::string& s) {
    if (s == "VTV_EX") return ProfileKind::VtvExpressway;
    if (s == "VTV_SDWW") return ProfileKind::VtvSdww;
    bad_value("channel.profile", "unknown profile '" + s + "'");
}

EstimatorKind parse_estimator(const std::string& s) {
    if (s == "DPA") return EstimatorKind::Dpa;
    if (s == "STA") return EstimatorKind::Sta;
    if (s == "TRFI") return EstimatorKind::Trfi;
    bad_value("estimator.kind", "unknown estimator '" + s + "'");
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
    ExperimentConfig c;
    c.raw = j;
    c.digest = fnv1a_hex(j.dump().data(), j.dump().size());

    c.master_seed = fetch<std::uint64_t>(j, "master_seed", c.master_seed);
    c.modulation = parse_modulation(fetch<std::string>(j, "modulation", "QPSK"));
    c.profile = parse_profile(fetch<std::string>(j, "channel.profile", "VTV_SDWW"));
    c.doppler_hz = fetch<double>(j, "channel.doppler_hz", c.doppler_hz);
    if (c.doppler_hz < 0) bad_value("channel.doppler_hz", "must be >= 0");
    c.frame_symbols = fetch<int>(j, "frame.n_symbols", c.frame_symbols);
    if (c.frame_symbols < 1) bad_value("frame.n_symbols", "must be >= 1");

    std::string hpa_kind = fetch<std::string>(j, "hpa.kind", "linear");
    if (hpa_kind == "linear") {
        c.hpa.kind = HpaKind::Linear;
    } else if (hpa_kind == "rapp") {
        c.hpa.kind = HpaKind::Rapp;
    } else {
        bad_value("hpa.kind", "expected 'linear' or 'rapp'");
    }
    c.hpa.ibo_db = fetch<double>(j, "hpa.ibo_db", c.hpa.ibo_db);
    c.hpa.smoothness = fetch<double>(j, "hpa.smoothness", c.hpa.smoothness);
    if (c.hpa.smoothness <= 0) bad_value("hpa.smoothness", "must be > 0");

    c.estimator = parse_estimator(fetch<std::string>(j, "estimator.kind", "STA"));
    c.sta.alpha = fetch<double>(j, "estimator.alpha", c.sta.alpha);
    c.sta.beta = fetch<int>(j, "estimator.beta", c.sta.beta);
    c.sta.separate_dpa_track = fetch<bool>(j, "estimator.separate_dpa_track", false);
    if (c.sta.alpha < 1.0) bad_value("estimator.alpha", "must be >= 1");
    if (c.sta.beta < 0) bad_value("estimator.beta", "must be >= 0");
    c.feedback_fnn = fetch<bool>(j, "estimator.feedback_fnn", c.feedback_fnn);

    c.data_frames = fetch<int>(j, "data.n_frames", c.data_frames);
    if (c.data_frames < 1) bad_value("data.n_frames", "must be >= 1");
    c.train_fraction = fetch<double>(j, "data.train_fraction", c.train_fraction);
    if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) {
        bad_value("data.train_fraction", "must be in (0,1)");
    }
    c.train_snr_db = fetch<double>(j, "data.snr_db", c.train_snr_db);

    c.arch = fetch<std::vector<int>>(j, "training.arch", c.arch);
    if (c.arch.empty()) bad_value("training.arch", "must name at least one hidden layer");
    for (int d : c.arch) {
        if (d < 1) bad_value("training.arch", "layer widths must be >= 1");
    }
    c.epochs = fetch<int>(j, "training.epochs", c.epochs);
    if (c.epochs < 0) bad_value("training.epochs", "must be >= 0");
    c.batch_size = fetch<int>(j, "training.batch_size", c.batch_size);
    if (c.batch_size < 1) bad_value("training.batch_size", "must be >= 1");
    c.learning_rate = fetch<double>(j, "training.learning_rate", c.learning_rate);
    if (!(c.learning_rate > 0)) bad_value("training.learning_rate", "must be > 0");
    c.lambda = fetch<double>(j, "training.lambda", c.lambda);
    if (c.lambda < 0) bad_value("training.lambda", "must be >= 0");
    c.adam_beta1 = fetch<double>(j, "training.adam_beta1", c.adam_beta1);
    c.adam_beta2 = fetch<double>(j, "training.adam_beta2", c.adam_beta2);
    c.adam_eps = fetch<double>(j, "training.adam_eps", c.adam_eps);

    c.gammas = fetch<std::vector<double>>(j, "sweep.gammas", c.gammas);
    if (c.gammas.empty()) bad_value("sweep.gammas", "must be nonempty");
    for (double g : c.gammas) {
        if (!(g > 0.0 && g < 1.0)) bad_value("sweep.gammas", "each gamma must be in (0,1)");
    }
    c.sweep_snr_db = fetch<double>(j, "sweep.snr_db", c.sweep_snr_db);
    c.sweep_frames = fetch<int>(j, "sweep.n_frames", c.sweep_frames);
    if (c.sweep_frames < 1) bad_value("sweep.n_frames", "must be >= 1");

    c.snr_grid_db = fetch<std::vector<double>>(j, "eval.snr_grid_db", c.snr_grid_db);
    if (c.snr_grid_db.empty()) bad_value("eval.snr_grid_db", "must be nonempty");
    c.eval_frames = fetch<int>(j, "eval.n_frames", c.eval_frames);
    if (c.eval_frames < 1) bad_value("eval.n_frames", "must be >= 1");
    c.hist_bins = fetch<int>(j, "eval.hist_bins", c.hist_bins);
    if (c.hist_bins < 2) bad_value("eval.hist_bins", "must be >= 2");

    c.probe_points = fetch<int>(j, "probe.points", c.probe_points);
    if (c.probe_points < 3) bad_value("probe.points", "must be >= 3");
    c.probe_t_max = fetch<double>(j, "probe.t_max", c.probe_t_max);
    if (!(c.probe_t_max > 0)) bad_value("probe.t_max", "must be > 0");
    c.probe_rows = fetch<int>(j, "probe.rows", c.probe_rows);
    c.probe_directions = fetch<int>(j, "probe.directions", c.probe_directions);
    if (c.probe_directions < 1) bad_value("probe.directions", "must be >= 1");

    c.out_dir = fetch<std::string>(j, "paths.out_dir", c.out_dir);
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config " + path.string());
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + path.string() + ": " + e.what());
    }
    return parse_config(j);
}

void apply_desk_scale(ExperimentConfig& cfg) {
    cfg.data_frames = std::min(cfg.data_frames, 200);
    cfg.epochs = std::min(cfg.epochs, 100);
    cfg.sweep_frames = std::min(cfg.sweep_frames, 200);
    cfg.eval_frames = std::min(cfg.eval_frames, 200);
    cfg.raw["desk_scale"] = true;
    std::string dumped = cfg.raw.dump();
    cfg.digest = fnv1a_hex(dumped.data(), dumped.size());
}

// ---------------------------------------------------------------------------
// Dataset cache

namespace {
constexpr char kXcdsMagic[4] = {'X', 'C', 'D', 'S'};
constexpr std::uint32_t kXcdsVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const fs::path& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("truncated dataset cache " + path.string());
    return v;
}
}  // namespace

void save_dataset(const Dataset& data, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out.write(kXcdsMagic, 4);
    write_pod(out, kXcdsVersion);
    write_pod(out, static_cast<std::uint64_t>(data.rows()));
    write_pod(out, static_cast<std::uint32_t>(data.d_in));
    write_pod(out, static_cast<std::uint32_t>(data.d_out));
    std::size_t n = data.rows();
    for (std::size_t r = 0; r < n; ++r) {
        out.write(reinterpret_cast<const char*>(data.inputs.data() + r * data.d_in),
                  sizeof(float) * data.d_in);
        out.write(reinterpret_cast<const char*>(data.targets.data() + r * data.d_out),
                  sizeof(float) * data.d_out);
    }
    out.write(data.meta.data(), static_cast<std::streamsize>(data.meta.size()));
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

Dataset load_dataset(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open dataset cache " + path.string());
    }
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kXcdsMagic, 4) != 0) {
        throw IoError("bad magic in dataset cache " + path.string());
    }
    auto version = read_pod<std::uint32_t>(in, path);
    if (version != kXcdsVersion) {
        throw IoError("unsupported dataset cache version " + std::to_string(version) + " in " +
                      path.string());
    }
    auto rows = read_pod<std::uint64_t>(in, path);
    auto d_in = read_pod<std::uint32_t>(in, path);
    auto d_out = read_pod<std::uint32_t>(in, path);
    Dataset d;
    d.d_in = static_cast<int>(d_in);
    d.d_out = static_cast<int>(d_out);
    d.inputs.resize(rows * d_in);
    d.targets.resize(rows * d_out);
    std::vector<float> row(d_in + d_out);
    for (std::uint64_t r = 0; r < rows; ++r) {
        in.read(reinterpret_cast<char*>(row.data()), sizeof(float) * row.size());
        if (!in) throw IoError("truncated dataset cache " + path.string());
        std::memcpy(d.inputs.data() + r * d_in, row.data(), sizeof(float) * d_in);
        std::memcpy(d.targets.data() + r * d_out, row.data() + d_in, sizeof(float) * d_out);
    }
    std::ostringstream rest;
    rest << in.rdbuf();
    d.meta = rest.str();
    return d;
}

// ---------------------------------------------------------------------------
// CSV

CsvWriter::CsvWriter(const fs::path& path, const std::vector<std::string>& header)
    : path_(path), columns_(header.size()) {
    row(header);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) {
        throw std::invalid_argument("CsvWriter: wrong column count");
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) buffer_ += ',';
        buffer_ += cells[i];
    }
    buffer_ += '\n';
}

void CsvWriter::close() {
    if (closed_) return;
    std::ofstream out(path_, std::ios::binary);
    if (!out) {
        throw IoError("cannot open " + path_.string() + " for writing");
    }
    out.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
    if (!out) {
        throw IoError("write failed for " + path_.string());
    }
    closed_ = true;
}

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string fmt(int v) { return std::to_string(v); }
std::string fmt(long long v) { return std::to_string(v); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }

// ---------------------------------------------------------------------------
// Experiment plumbing

LinkConfig make_link_config(const ExperimentConfig& cfg, int n_frames) {
    LinkConfig link;
    link.frame = ieee80211p_frame_spec(cfg.frame_symbols);
    link.scheme = make_modulation(cfg.modulation);
    link.profile = make_profile(cfg.profile, cfg.doppler_hz);
    link.hpa = cfg.hpa;
    link.estimator = cfg.estimator;
    link.sta = cfg.sta;
    link.feedback_fnn = cfg.feedback_fnn;
    link.n_frames = n_frames;
    link.seed = cfg.master_seed;
    return link;
}

TrainConfig train_config_of(const ExperimentConfig& cfg) {
    TrainConfig tc;
    tc.learning_rate = cfg.learning_rate;
    tc.batch_size = cfg.batch_size;
    tc.epochs = cfg.epochs;
    tc.seed = cfg.master_seed;
    tc.lambda = cfg.lambda;
    tc.adam_beta1 = cfg.adam_beta1;
    tc.adam_beta2 = cfg.adam_beta2;
    tc.adam_eps = cfg.adam_eps;
    return tc;
}

DatasetPair generate_datasets(const ExperimentConfig& cfg) {
    LinkConfig link = make_link_config(cfg, cfg.data_frames);
    const int k_on = link.frame.k_on;
    int n_train_frames =
        static_cast<int>(std::llround(cfg.train_fraction * cfg.data_frames));
    n_train_frames = std::clamp(n_train_frames, 1, cfg.data_frames - 1);

    DatasetPair pair;
    for (Dataset* d : {&pair.train, &pair.test}) {
        d->d_in = 2 * k_on;
        d->d_out = 2 * k_on;
    }
    pair.train.inputs.reserve(static_cast<std::size_t>(n_train_frames) * link.frame.n_symbols *
                              2 * k_on);

    for (int f = 0; f < cfg.data_frames; ++f) {
        FrameCapture cap;
        run_frame(link, cfg.train_snr_db, static_cast<std::uint64_t>(f), &cap);
        Dataset& dst = f < n_train_frames ? pair.train : pair.test;
        for (std::size_t s = 0; s < cap.conv_estimates.size(); ++s) {
            std::vector<double> in = stack_complex(cap.conv_estimates[s]);
            std::vector<double> out = stack_complex(cap.true_channels[s]);
            for (double v : in) dst.inputs.push_back(static_cast<float>(v));
            for (double v : out) dst.targets.push_back(static_cast<float>(v));
        }
    }

    json meta;
    meta["config_digest"] = cfg.digest;
    meta["master_seed"] = cfg.master_seed;
    meta["profile"] = link.profile.name;
    meta["doppler_hz"] = cfg.doppler_hz;
    meta["snr_db"] = cfg.train_snr_db;
    meta["modulation"] = static_cast<int>(cfg.modulation);
    meta["estimator"] = static_cast<int>(cfg.estimator);
    meta["n_frames"] = cfg.data_frames;
    meta["xcds_version"] = kXcdsVersion;
    meta["role"] = "train";
    meta["frame_range"] = {0, n_train_frames};
    pair.train.meta = meta.dump();
    meta["role"] = "test";
    meta["frame_range"] = {n_train_frames, cfg.data_frames};
    pair.test.meta = meta.dump();
    return pair;
}

TrainedPipeline run_training_pipeline(const ExperimentConfig& cfg) {
    TrainedPipeline p;
    p.data = generate_datasets(cfg);
    TrainConfig tc = train_config_of(cfg);
    TrainResult u = train_u(p.data.train, cfg.arch, tc);
    p.u_model = std::move(u.model);
    p.u_history = std::move(u.history);
    NTrainResult n = train_n_model(p.u_model, p.data.train, cfg.arch, tc);
    p.n_model = std::move(n.model);
    p.n_history = std::move(n.history);
    p.mask = mean_aggregated_mask(p.n_model, p.data.test);
    return p;
}

std::vector<std::vector<double>> per_sample_masks(const Mlp& n_model, const Dataset& data) {
    int k_on = data.d_in / 2;
    std::vector<std::vector<double>> out;
    out.reserve(data.rows());
    for (std::size_t r = 0; r < data.rows(); ++r) {
        NoiseMask m = eval_mask(n_model, data.input_row(r));
        out.push_back(aggregate_mask(m, k_on).values);
    }
    return out;
}

std::filesystem::path resolve_out_dir(const ExperimentConfig& cfg, const std::string& cli_out) {
    const char* env = std::getenv("XAI_CHEST_OUT");
    if (env && *env) return fs::path(env);
    if (!cli_out.empty()) return fs::path(cli_out);
    return fs::path(cfg.out_dir);
}

void write_manifest(const CommandContext& ctx, const std::string& command,
                    double wall_seconds, const std::vector<fs::path>& artifacts) {
    json m;
    m["command"] = command;
    m["config_digest"] = ctx.cfg.digest;
    m["config"] = ctx.cfg.raw;
    m["master_seed"] = ctx.cfg.master_seed;
    m["wall_time_s"] = wall_seconds;
    m["workers"] = ctx.workers;
    m["versions"] = {{"app", "1.0.0"}, {"xcds", 1}, {"xcmodel", 1}};
    json art = json::object();
    for (const auto& a : artifacts) {
        art[a.filename().string()] = file_checksum(a);
    }
    m["artifacts"] = art;
    fs::path path = ctx.out_dir / (command + ".manifest.json");
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write manifest " + path.string());
    }
    out << m.dump(2) << "\n";
}

namespace {

void require_file(const fs::path& path, const std::string& producer) {
    if (!fs::exists(path)) {
        throw MissingArtifactError("missing artifact '" + path.string() +
                                   "' — produce it with `xai-chest " + producer + "`");
    }
}

class Stopwatch {
  public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_;
};

void write_history_csv(const fs::path& path, const std::vector<double>& history) {
    CsvWriter csv(path, {"epoch", "loss"});
    for (std::size_t e = 0; e < history.size(); ++e) {
        csv.row({fmt(static_cast<int>(e)), fmt(history[e])});
    }
    csv.close();
}

}  // namespace

void write_mask_csv(const fs::path& path, const AggregatedMask& mask, const FrameSpec& spec) {
    CsvWriter csv(path, {"subcarrier_index", "weight", "is_pilot"});
    for (int k = 0; k < static_cast<int>(mask.values.size()); ++k) {
        bool pilot = std::find(spec.pilot_indices.begin(), spec.pilot_indices.end(), k) !=
                     spec.pilot_indices.end();
        csv.row({fmt(k), fmt(mask.values[k]), pilot ? "1" : "0"});
    }
    csv.close();
}

void write_sweep_csv(const fs::path& path, const SweepResult& result, const std::string& digest) {
    CsvWriter csv(path, {"gamma", "n_relevant", "ber_relevant", "ber_irrelevant", "ber_full",
                         "mse", "selected", "config_digest"});
    for (const auto& row : result.rows) {
        csv.row({fmt(row.gamma), fmt(row.n_relevant), fmt(row.ber_relevant),
                 fmt(row.ber_irrelevant), fmt(result.ber_full), fmt(row.mse),
                 row.selected ? "1" : "0", digest});
    }
    // Baseline row: the full input is the gamma -> 1 limit.
    csv.row({fmt(1.0), fmt(static_cast<int>(result.full_model.input_dim() / 2)),
             fmt(result.ber_full), "nan", fmt(result.ber_full), fmt(result.mse_full), "0",
             digest});
    csv.close();
}

void write_ber_csv(const fs::path& path, const BerCurve& curve) {
    CsvWriter csv(path, {"snr_db", "bit_errors", "total_bits", "ber", "mse_channel",
                         "config_digest"});
    for (const auto& p : curve.points) {
        csv.row({fmt(p.snr_db), fmt(p.bit_errors), fmt(p.total_bits), fmt(p.ber),
                 fmt(p.mse_channel), curve.config_digest});
    }
    csv.close();
}

void write_histogram_csv(const fs::path& path, const Histogram& hist) {
    CsvWriter csv(path, {"bin_low", "bin_high", "count_data", "count_pilot"});
    for (std::size_t b = 0; b < hist.bin_low.size(); ++b) {
        csv.row({fmt(hist.bin_low[b]), fmt(hist.bin_high[b]), fmt(hist.count_data[b]),
                 fmt(hist.count_pilot[b])});
    }
    csv.close();
}

// ---------------------------------------------------------------------------
// Commands

int cmd_gen_data(const CommandContext& ctx) {
    Stopwatch timer;
    fs::create_directories(ctx.out_dir);
    DatasetPair pair = generate_datasets(ctx.cfg);
    fs::path train_path = ctx.out_dir / "train.xcds";
    fs::path test_path = ctx.out_dir / "test.xcds";
    save_dataset(pair.train, train_path);
    save_dataset(pair.test, test_path);
    std::cout << "gen-data: " << pair.train.rows() << " train rows, " << pair.test.rows()
              << " test rows\n";
    write_manifest(ctx, "gen-data", timer.seconds(), {train_path, test_path});
    return kExitOk;
}

int cmd_train_u(const CommandContext& ctx) {
    Stopwatch timer;
    fs::create_directories(ctx.out_dir);
    fs::path train_path = ctx.out_dir / "train.xcds";
    require_file(train_path, "gen-data");
    Dataset train = load_dataset(train_path);
    TrainResult result = train_u(train, ctx.cfg.arch, train_config_of(ctx.cfg));
    fs::path model_path = ctx.out_dir / "u_model.txt";
    save_model(result.model, model_path);
    fs::path hist_path = ctx.out_dir / "u_history.csv";
    write_history_csv(hist_path, result.history);
    std::cout << "train-u: " << result.history.size() << " epochs";
    if (!result.history.empty()) std::cout << ", final loss " << result.history.back();
    std::cout << "\n";
    write_manifest(ctx, "train-u", timer.seconds(), {model_path, hist_path});
    return kExitOk;
}

int cmd_train_n(const CommandContext& ctx) {
    Stopwatch timer;
    fs::create_directories(ctx.out_dir);
    fs::path train_path = ctx.out_dir / "train.xcds";
    fs::path test_path = ctx.out_dir / "test.xcds";
    fs::path u_path = ctx.out_dir / "u_model.txt";
    require_file(train_path, "gen-data");
    require_file(test_path, "gen-data");
    require_file(u_path, "train-u");
    Dataset train = load_dataset(train_path);
    Dataset test = load_dataset(test_path);
    Mlp u_model = load_model(u_path);
    NTrainResult result = train_n_model(u_model, train, ctx.cfg.arch, train_config_of(ctx.cfg));
    fs::path model_path = ctx.out_dir / "n_model.txt";
    save_model(result.model, model_path);
    fs::path hist_path = ctx.out_dir / "n_history.csv";
    write_history_csv(hist_path, result.history);
    AggregatedMask mask = mean_aggregated_mask(result.model, test);
    fs::path mask_path = ctx.out_dir / "mask.csv";
    write_mask_csv(mask_path, mask, ieee80211p_frame_spec(ctx.cfg.frame_symbols));
    double mean = 0.0;
    for (double v : mask.values) mean += v;
    std::cout << "train-n: mean aggregated mask "
              << mean / static_cast<double>(mask.values.size()) << "\n";
    write_manifest(ctx, "train-n", timer.seconds(), {model_path, hist_path, mask_path});
    return kExitOk;
}

int cmd_sweep(const CommandContext& ctx) {
    Stopwatch timer;
    fs::create_directories(ctx.out_dir);
    fs::path train_path = ctx.out_dir / "train.xcds";
    fs::path test_path = ctx.out_dir / "test.xcds";
    fs::path n_path = ctx.out_dir / "n_model.txt";
    require_file(train_path, "gen-data");
    require_file(test_path, "gen-data");
    require_file(n_path, "train-n");
    Dataset train = load_dataset(train_path);
    Dataset test = load_dataset(test_path);
    Mlp n_model = load_model(n_path);
    AggregatedMask mask = mean_aggregated_mask(n_model, test);

    SweepConfig sc;
    sc.gammas = ctx.cfg.gammas;
    sc.hidden = ctx.cfg.arch;
    sc.train = train_config_of(ctx.cfg);
    sc.link = make_link_config(ctx.cfg, ctx.cfg.sweep_frames);
    sc.snr_db = ctx.cfg.sweep_snr_db;
    sc.workers = ctx.workers;
    SweepResult result = threshold_sweep(mask, train, test, sc);

    std::vector<fs::path> artifacts;
    fs::path csv_path = ctx.out_dir / "sweep.csv";
    write_sweep_csv(csv_path, result, ctx.cfg.digest);
    artifacts.push_back(csv_path);
    fs::path full_path = ctx.out_dir / "sweep_full.model";
    save_model(result.full_model, full_path);
    artifacts.push_back(full_path);
    for (std::size_t gi = 0; gi < result.rows.size(); ++gi) {
        std::string tag = "sweep_g" + fmt(result.rows[gi].gamma);
        if (!result.relevant_models[gi].dims.empty()) {
            fs::path p = ctx.out_dir / (tag + "_relevant.model");
            save_model(result.relevant_models[gi], p);
            artifacts.push_back(p);
        }
        if (!result.irrelevant_models[gi].dims.empty()) {
            fs::path p = ctx.out_dir / (tag + "_irrelevant.model");
            save_model(result.irrelevant_models[gi], p);
            artifacts.push_back(p);
        }
    }
    if (result.selected_index >= 0) {
        const SweepRow& sel = result.rows[result.selected_index];
        std::cout << "sweep: selected gamma " << sel.gamma << " with |Psi| = " << sel.n_relevant
                  << ", BER " << sel.ber_relevant << " (full " << result.ber_full << ")\n";
    } else {
        std::cout << "sweep: no gamma satisfied the BER constraint (baseline kept)\n";
    }
    write_manifest(ctx, "sweep", timer.seconds(), artifacts);
    return kExitOk;
}

int cmd_ber(const CommandContext& ctx, const std::string& model_path,
            const std::string& relevant_list, double gamma) {
    Stopwatch timer;
    fs::create_directories(ctx.out_dir);
    LinkConfig link = make_link_config(ctx.cfg, ctx.cfg.eval_frames);

    Mlp model;
    if (!model_path.empty()) {
        require_file(model_path, "train-u");
        model = load_model(model_path);
        link.model = &model;
        if (!relevant_list.empty()) {
            std::istringstream ss(relevant_list);
            std::string tok;
            while (std::getline(ss, tok, ',')) {
                link.relevant.push_back(std::stoi(tok));
            }
        } else if (gamma > 0.0) {
            fs::path n_path = ctx.out_dir / "n_model.txt";
            fs::path test_path = ctx.out_dir / "test.xcds";
            require_file(n_path, "train-n");
            require_file(test_path, "gen-data");
            Mlp n_model = load_model(n_path);
            AggregatedMask mask = mean_aggregated_mask(n_model, load_dataset(test_path));
            link.relevant = classify_subcarriers(mask, gamma).relevant;
        }
        int expect = link.relevant.empty() ? 2 * link.frame.k_on
                                           : 2 * static_cast<int>(link.relevant.size());
        if (model.input_dim() != expect) {
            throw ConfigError("model input dim " + std::to_string(model.input_dim()) +
                              " does not match expected " + std::to_string(expect));
        }
    }

    BerCurve curve = ber_curve(link, ctx.cfg.snr_grid_db, ctx.workers);
    curve.config_digest = ctx.cfg.digest;
    fs::path csv_path = ctx.out_dir / "ber.csv";
    write_ber_csv(csv_path, curve);
    for (const auto& p : curve.points) {
        std::cout << "snr " << p.snr_db << " dB: ber " << p.ber << " (" << p.bit_errors << "/"
                  << p.total_bits << ")\n";
    }
    write_manifest(ctx, "ber", timer.seconds(), {csv_path});
    return kExitOk;
}

int cmd_flops(const CommandContext& ctx, const std::vector<std::string>& dims_args) {
    Stopwatch timer;
    fs::create_directories(ctx.out_dir);
    std::vector<std::vector<int>> dim_sets;
    if (dims_args.empty()) {
        std::vector<int> dims;
        int io = 2 * ieee80211p_frame_spec(ctx.cfg.frame_symbols).k_on;
        dims.push_back(io);
        dims.insert(dims.end(), ctx.cfg.arch.begin(), ctx.cfg.arch.end());
        dims.push_back(io);
        dim_sets.push_back(dims);
    } else {
        for (const auto& s : dims_args) {
            std::vector<int> dims;
            std::istringstream ss(s);
            std::string tok;
            while (std::getline(ss, tok, ',')) dims.push_back(std::stoi(tok));
            if (dims.size() < 2) {
                throw ConfigError("--dims needs at least two comma-separated widths");
            }
            dim_sets.push_back(dims);
        }
    }
    fs::path csv_path = ctx.out_dir / "flops.csv";
    CsvWriter csv(csv_path, {"dims", "total_flops", "mult_adds", "bias_adds", "activations"});
    for (const auto& dims : dim_sets) {
        FlopsReport r = count_flops(dims);
        long long mults = 0, biases = 0;
        for (const auto& l : r.layers) {
            mults += l.mult_adds;
            biases += l.bias_adds;
        }
        std::string name;
        for (std::size_t i = 0; i < dims.size(); ++i) {
            if (i) name += 'x';
            name += std::to_string(dims[i]);
        }
        csv.row({name, fmt(r.total), fmt(mults), fmt(biases), fmt(r.total_activations)});
        std::cout << "flops " << name << ": " << r.total << "\n";
    }
    csv.close();
    write_manifest(ctx, "flops", timer.seconds(), {csv_path});
    return kExitOk;
}

int cmd_probe(const CommandContext& ctx) {
    Stopwatch timer;
    fs::create_directories(ctx.out_dir);
    fs::path u_path = ctx.out_dir / "u_model.txt";
    fs::path test_path = ctx.out_dir / "test.xcds";
    require_file(u_path, "train-u");
    require_file(test_path, "gen-data");
    Mlp u_model = load_model(u_path);
    Dataset test = load_dataset(test_path);

    std::vector<double> t_grid(ctx.cfg.probe_points);
    for (int i = 0; i < ctx.cfg.probe_points; ++i) {
        t_grid[i] = -ctx.cfg.probe_t_max +
                    2.0 * ctx.cfg.probe_t_max * i / (ctx.cfg.probe_points - 1);
    }
    fs::path curve_path = ctx.out_dir / "probe.csv";
    fs::path cert_path = ctx.out_dir / "probe_certificates.csv";
    CsvWriter curve_csv(curve_path, {"direction", "t", "loss"});
    CsvWriter cert_csv(cert_path, {"direction", "t_a", "t_m", "t_b", "gap"});
    for (int d = 0; d < ctx.cfg.probe_directions; ++d) {
        std::uint64_t dir_seed = derive_seed(ctx.cfg.master_seed, SeedPurpose::Direction, d);
        auto curve = loss_landscape_probe(u_model, test, dir_seed, t_grid,
                                          static_cast<std::size_t>(ctx.cfg.probe_rows));
        for (const auto& p : curve) {
            curve_csv.row({fmt(d), fmt(p.t), fmt(p.loss)});
        }
        auto certs = find_convexity_violations(curve);
        for (const auto& c : certs) {
            cert_csv.row({fmt(d), fmt(curve[c.a].t), fmt(curve[c.m].t), fmt(curve[c.b].t),
                          fmt(c.gap)});
        }
        std::cout << "probe direction " << d << ": " << certs.size()
                  << " convexity violation(s)\n";
    }
    curve_csv.close();
    cert_csv.close();
    write_manifest(ctx, "probe", timer.seconds(), {curve_path, cert_path});
    return kExitOk;
}

}  // namespace xaichest::harness
