#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "opdyn/baselines.hpp"
#include "opdyn/demarcate.hpp"
#include "opdyn/estimate.hpp"
#include "opdyn/events.hpp"
#include "opdyn/graph.hpp"
#include "opdyn/simulate.hpp"

namespace opdyn {

/// Mean squared error over (actual, predicted) pairs.
double mse(std::span<const std::pair<double, double>> pairs);
/// Fraction of sign mismatches, with sgn(0) taken as +1.
double failure_rate(std::span<const std::pair<double, double>> pairs);

enum class SweepKind { None, Gamma, Horizon, TrainSize, Noise, SampleSize };
SweepKind parse_sweep_kind(const std::string& name);
std::string sweep_kind_name(SweepKind kind);

struct ExperimentConfig {
    std::vector<std::string> methods = {"D"};  // A|D|E|T or huber|lasso|hard|soft|slant
    double gamma = 0.2;
    double lookahead_hours = 4.0;
    double hours_to_time = 3600.0;  // stream time units per hour
    std::size_t n_forecast_samples = 10;
    double train_fraction = 0.9;
    double ridge_c = 1.0;
    double sigma = 1.0;
    Kernels kernels;
    IntensitySolverConfig solver{1e-12, 5000, 1e-4, 1e-4, 1};
    double huber_c = 1.0;
    double c1 = 1e-3;
    double c2 = 1.0;
    SweepKind sweep = SweepKind::None;
    std::vector<double> sweep_values;
    unsigned n_threads = 1;
    std::uint64_t rng_seed = 0;
    bool timing_in_csv = false;
};

struct MetricsRow {
    std::string method;
    double gamma = 0.0;
    double lookahead_hours = 0.0;
    double mse = 0.0;
    double failure_rate = 0.0;
    std::optional<double> param_mse;
    std::optional<double> precision;
    double runtime_seconds = 0.0;
};

struct PredictionRow {
    std::size_t event_index = 0;
    double actual = 0.0;
    double predicted = 0.0;
};

struct MethodOutcome {
    MetricsRow row;
    std::vector<PredictionRow> predictions;
};

/// Model fitted by any method token, plus the events it declared exogenous
/// (indices into the training stream; empty for Huber and Slant).
struct FittedMethod {
    ModelParams params;
    std::vector<std::size_t> declared_exogenous;
    std::vector<SolverTraceRow> solver_trace;  // criterion methods only
};

FittedMethod fit_method(const EventStream& train, const SocialGraph& graph,
                        const std::string& method, const ExperimentConfig& config);

/// Split, fit, and forecast every test event from the history available up
/// to lookahead before it (train and earlier test events alike). One row per
/// method and sweep point; sweeps over gamma, lookahead hours, or training
/// size are handled here.
std::vector<MethodOutcome> run_forecast_experiment(const EventStream& stream,
                                                   const SocialGraph& graph,
                                                   const ExperimentConfig& config);

/// Re-demarcates the whole stream (train plus test) and re-scores the fitted
/// model only on test events retained as endogenous. Emits the unsanitized
/// row and the sanitized row per criterion method.
std::vector<MethodOutcome> run_sanitized_test(const EventStream& stream, const SocialGraph& graph,
                                              const ExperimentConfig& config);

struct SyntheticConfig {
    ExperimentConfig base;
    std::string graph_kind = "ba";  // ba | kronecker_cp | kronecker_random
    std::size_t n_users = 128;
    std::size_t ba_m = 2;
    unsigned kron_power = 9;
    double events_per_node = 50.0;
    double exo_probability = 0.2;
    double noise_mean = 0.0;
    double noise_std = 0.31622776601683794;      // sqrt(0.1)
    double noise_mean_prior_std = 1.0;
};

SocialGraph make_synthetic_graph(const SyntheticConfig& config, std::uint64_t seed);

/// Generates graph, parameters and labeled stream, then runs every method:
/// forecast metrics on the held-out split plus opinion-parameter error
/// against the ground truth and demarcation precision against the labels.
/// Sweeps over noise means or per-node sample sizes regenerate per point.
std::vector<MethodOutcome> run_synthetic_suite(const SyntheticConfig& config);

void write_metrics_csv(const std::vector<MetricsRow>& rows, bool timing_in_csv,
                       const std::filesystem::path& path);
std::vector<MetricsRow> load_metrics_csv(const std::filesystem::path& path);
void write_predictions_csv(const std::vector<PredictionRow>& rows,
                           const std::filesystem::path& path);

std::string sha256_file(const std::filesystem::path& path);

}  // namespace opdyn
