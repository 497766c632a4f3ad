#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "inn/baselines.hpp"
#include "inn/config.hpp"
#include "inn/deconv.hpp"
#include "inn/interval.hpp"
#include "inn/io.hpp"
#include "inn/metrics.hpp"
#include "inn/network.hpp"

namespace inn {

// Seed streams of one run; every random draw of the pipeline derives from
// derive_seed(run seed, stream).
enum SeedStream : std::uint64_t {
    kStreamData = 1,
    kStreamBaseInit = 2,
    kStreamBaseTrain = 3,
    kStreamInn = 4,
    kStreamProbOut = 5,
    kStreamMcDrop = 6,
    kStreamShuffle = 7,
};

/// The 1D deconvolution CNN: conv1d layers with the configured channel
/// schedule, ReLU after all but the last, dropout after the listed layers.
Network build_deconv_net(const RunConfig& cfg);

/// Dataset for the config at noise level `sigma`.
DeconvDataset make_dataset(const RunConfig& cfg, double sigma, NoiseMode mode, std::uint64_t run_seed);

Network train_base(const RunConfig& cfg, const DeconvDataset& data, std::uint64_t run_seed,
                   const EpochCallback& on_epoch = {});

/// Configured beta, or beta_mae_factor times the base network's mean absolute
/// error on the validation split.
double choose_beta(const RunConfig& cfg, const Network& base, const DeconvDataset& data);

InnTrainConfig inn_train_config(const RunConfig& cfg, double beta, std::uint64_t run_seed);

struct MethodScores {
    std::string method;
    double mse = 0.0;
    PwccSummary pwcc;
    double mean_uncertainty = 0.0;
    std::uint64_t passes_per_query = 0;
};

struct EvalInputs {
    const Network* base = nullptr;
    const IntervalNetwork* inn = nullptr;
    const ProbOutNetwork* probout = nullptr;  // optional
    bool run_mcdrop = true;
};

struct EvalReport {
    std::uint64_t seed = 0;
    double beta = 0.0;
    double coverage_test = 0.0;   // lambda = 0
    double coverage_train = 0.0;
    double mean_width_test = 0.0;
    std::vector<MarkovRow> markov_train;
    std::vector<MarkovRow> markov_test;
    std::vector<MarkovAlphaRow> alpha_train;
    std::vector<DirectionPoint> direction;
    std::vector<MethodScores> methods;  // base-relative scores of inn, mcdrop, probout
    PwccSummary shuffled;               // INN widths permuted within each sample
    Tensor test_pred, test_lower, test_upper, test_target;
};

EvalReport evaluate(const RunConfig& cfg, const DeconvDataset& data, const EvalInputs& in, double beta,
                    std::uint64_t run_seed);

const MethodScores& scores_of(const EvalReport& report, const std::string& method);

struct RunHooks {
    EpochCallback on_base_epoch;
    InnEpochCallback on_inn_epoch;
    InnStepObserver on_inn_step;
    EpochCallback on_probout_epoch;
};

struct RunArtifacts {
    DeconvDataset data;
    Network base;
    IntervalNetwork inn;
    ProbOutNetwork probout;
    double beta = 0.0;
    EvalReport report;
};

/// Full single-seed pipeline: data, base, beta, INN, ProbOut, MCDrop, evaluation.
RunArtifacts run_pipeline(const RunConfig& cfg, std::uint64_t run_seed, const RunHooks& hooks = {},
                          bool with_probout = true);

struct NoisePoint {
    double sigma = 0.0;
    double inn_width = 0.0;       // mean INN output width on the test split
    double mcdrop_std = 0.0;
    double probout_std = 0.0;
    double inn_coverage = 0.0;
    double base_mse = 0.0;
};

/// Retrains base and UQ models on regenerated data (noise on inputs and
/// targets) for every sigma of the grid.
std::vector<NoisePoint> noise_sweep(const RunConfig& cfg, std::uint64_t run_seed, bool with_probout = true,
                                    const std::function<void(const NoisePoint&)>& on_point = {});

// ---- Artifact tables -------------------------------------------------------
// report.csv    run,seed,method,metric,value
// markov.csv    seed,split,kind,lambda,alpha,bound,value,margin,pass
// direction.csv threshold,accuracy,proportion,considered
// noise.csv     sigma,inn_width,mcdrop_std,probout_std,inn_coverage,base_mse

CsvTable report_table(const std::vector<EvalReport>& runs);
CsvTable markov_table(const EvalReport& report);
CsvTable direction_table(const std::vector<DirectionPoint>& curve);
CsvTable noise_table(const std::vector<NoisePoint>& points);

/// sample_k.svg overlays for the first `count` test samples.
void write_sample_plots(const std::filesystem::path& dir, const EvalReport& report, std::size_t count);

struct Manifest {
    std::string command;
    Scale scale = Scale::Paper;
    std::uint64_t seed = 0;
    std::string config_text;
    double wall_seconds = 0.0;
    std::vector<std::pair<std::string, std::uint64_t>> passes_per_query;
};

std::string render_manifest(const Manifest& m);

} // namespace inn
