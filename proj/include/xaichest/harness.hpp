#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "xaichest/xai.hpp"

namespace xaichest::harness {

// Distinct process exit codes per failure class.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumeric = 4;
inline constexpr int kExitMissing = 5;
inline constexpr int kExitUsage = 64;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MissingArtifactError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Typed view of the experiment configuration. `raw` keeps the parsed JSON;
// `digest` is the FNV-1a hash of its canonical dump and is stamped on every
// output.
struct ExperimentConfig {
    std::uint64_t master_seed = 1;
    Modulation modulation = Modulation::Qpsk;
    ProfileKind profile = ProfileKind::VtvSdww;
    double doppler_hz = 1000.0;
    int frame_symbols = 50;
    HpaModel hpa;
    EstimatorKind estimator = EstimatorKind::Sta;
    StaParams sta;
    bool feedback_fnn = true;

    int data_frames = 200;
    double train_fraction = 0.8;
    double train_snr_db = 40.0;

    std::vector<int> arch{15, 15, 15};
    int epochs = 100;
    int batch_size = 128;
    double learning_rate = 1e-3;
    double lambda = 0.005;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    std::vector<double> gammas{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
    double sweep_snr_db = 40.0;
    int sweep_frames = 200;

    std::vector<double> snr_grid_db{0, 5, 10, 15, 20, 25, 30, 35, 40};
    int eval_frames = 200;
    int hist_bins = 20;

    int probe_points = 401;
    double probe_t_max = 2.0;
    int probe_rows = 2000;
    int probe_directions = 3;

    std::string out_dir = "out";

    nlohmann::json raw;
    std::string digest;
};

std::string fnv1a_hex(const void* data, std::size_t size);
std::string file_checksum(const std::filesystem::path& path);

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

// Caps frame counts and epochs for laptop-scale runs.
void apply_desk_scale(ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Dataset cache (.xcds): "XCDS", u32 version, u64 rows, u32 d_in, u32 d_out,
// rows*(d_in+d_out) little-endian float32 (inputs then targets per row),
// trailing UTF-8 JSON manifest.
void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// CSV ('.' decimal separator, LF endings, mandatory header).
class CsvWriter {
  public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
    void row(const std::vector<std::string>& cells);
    void close();

  private:
    std::string buffer_;
    std::filesystem::path path_;
    std::size_t columns_;
    bool closed_ = false;
};

std::string fmt(double v);
std::string fmt(int v);
std::string fmt(long long v);
std::string fmt(std::uint64_t v);

// ---------------------------------------------------------------------------
// Experiment plumbing.

LinkConfig make_link_config(const ExperimentConfig& cfg, int n_frames);

struct DatasetPair {
    Dataset train;
    Dataset test;
};

// Simulates data_frames frames at the training SNR and collects one
// (stacked conventional estimate, stacked true channel) row per OFDM symbol.
// The train/test split is by frame.
DatasetPair generate_datasets(const ExperimentConfig& cfg);

struct CommandContext {
    ExperimentConfig cfg;
    std::filesystem::path out_dir;
    int workers = 1;
};

std::filesystem::path resolve_out_dir(const ExperimentConfig& cfg,
                                      const std::string& cli_out);

void write_manifest(const CommandContext& ctx, const std::string& command,
                    double wall_seconds,
                    const std::vector<std::filesystem::path>& artifacts);

int cmd_gen_data(const CommandContext& ctx);
int cmd_train_u(const CommandContext& ctx);
int cmd_train_n(const CommandContext& ctx);
int cmd_sweep(const CommandContext& ctx);
int cmd_ber(const CommandContext& ctx, const std::string& model_path,
            const std::string& relevant_list, double gamma);
int cmd_flops(const CommandContext& ctx, const std::vector<std::string>& dims_args);
int cmd_probe(const CommandContext& ctx);

// threshold | modulation | selectivity | nonlinear | train_snr | estimators |
// arch_reduction
int run_suite(const CommandContext& ctx, const std::string& name);

// Shared helpers used by commands, suites, and the acceptance harness.
TrainConfig train_config_of(const ExperimentConfig& cfg);

struct TrainedPipeline {
    DatasetPair data;
    Mlp u_model;
    std::vector<double> u_history;
    Mlp n_model;
    std::vector<double> n_history;
    AggregatedMask mask;  // mean aggregated mask over the test set
};

// gen-data + train-u + train-n + testing-phase mask, all in memory.
TrainedPipeline run_training_pipeline(const ExperimentConfig& cfg);

std::vector<std::vector<double>> per_sample_masks(const Mlp& n_model, const Dataset& data);

void write_mask_csv(const std::filesystem::path& path, const AggregatedMask& mask,
                    const FrameSpec& spec);
void write_sweep_csv(const std::filesystem::path& path, const SweepResult& result,
                     const std::string& digest);
void write_ber_csv(const std::filesystem::path& path, const BerCurve& curve);
void write_histogram_csv(const std::filesystem::path& path, const Histogram& hist);

}  // namespace xaichest::harness
