#include "opdyn/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <openssl/evp.h>

#include "opdyn/detail/csv.hpp"
#include "opdyn/detail/parallel.hpp"
#include "opdyn/errors.hpp"

namespace opdyn {

namespace {

double sgn(double x) { return x < 0.0 ? -1.0 : 1.0; }

bool is_criterion_method(const std::string& method) {
    return method.size() == 1 && std::string("ADETadet").find(method[0]) != std::string::npos;
}

EstimateConfig make_estimate_config(const std::string& method, const ExperimentConfig& cfg,
                                    double gamma) {
    EstimateConfig ec;
    ec.demarcation.criterion = parse_criterion(method[0]);
    ec.demarcation.gamma = gamma;
    ec.demarcation.c = cfg.ridge_c;
    ec.demarcation.sigma = cfg.sigma;
    ec.demarcation.kernels = cfg.kernels;
    ec.demarcation.n_threads = cfg.n_threads;
    ec.solver = cfg.solver;
    ec.solver.n_threads = cfg.n_threads;
    return ec;
}

BaselineConfig make_baseline_config(const std::string& method, const ExperimentConfig& cfg,
                                    double gamma) {
    BaselineConfig bc;
    bc.method = parse_baseline(method);
    bc.huber_c = cfg.huber_c;
    bc.c1 = cfg.c1;
    bc.c2 = cfg.c2;
    bc.gamma = gamma;
    bc.kernels = cfg.kernels;
    bc.ridge_c = cfg.ridge_c;
    bc.sigma = cfg.sigma;
    bc.n_threads = cfg.n_threads;
    return bc;
}

/// Forecast every test event against the full observed history and collect
/// the prediction pairs. Events are processed into per-index slots, so the
/// result is thread-count independent.
std::vector<PredictionRow> forecast_test_events(const EventStream& full,
                                                const EventStream& test, std::size_t test_offset,
                                                const ModelParams& params,
                                                const SocialGraph& graph,
                                                const ExperimentConfig& cfg) {
    std::vector<PredictionRow> rows(test.size());
    const double lookahead = cfg.lookahead_hours * cfg.hours_to_time;
    detail::parallel_for(test.size(), cfg.n_threads, [&](std::size_t k) {
        const Event& e = test[k];
        ForecastConfig fc;
        fc.lookahead = lookahead;
        fc.n_samples = cfg.n_forecast_samples;
        fc.rng_seed = cfg.rng_seed + 1000003 * (test_offset + k);
        fc.n_threads = 1;
        const double predicted = forecast(e.user, e.time, full, params, graph, fc);
        rows[k] = PredictionRow{test_offset + k, e.sentiment, predicted};
    });
    return rows;
}

MetricsRow score_predictions(const std::vector<PredictionRow>& predictions) {
    std::vector<std::pair<double, double>> pairs;
    pairs.reserve(predictions.size());
    for (const auto& p : predictions) pairs.emplace_back(p.actual, p.predicted);
    MetricsRow row;
    row.mse = mse(pairs);
    row.failure_rate = failure_rate(pairs);
    return row;
}

double opinion_param_mse(const ModelParams& fitted, const ModelParams& truth) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t u = 0; u < truth.alpha.size(); ++u) {
        const double da = fitted.alpha[u] - truth.alpha[u];
        sum += da * da;
        ++count;
        for (std::size_t k = 0; k < truth.a_in[u].size(); ++k) {
            const double d = fitted.a_in[u][k] - truth.a_in[u][k];
            sum += d * d;
            ++count;
        }
    }
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

std::optional<double> exo_precision(const std::vector<std::size_t>& declared,
                                    const EventStream& train) {
    if (declared.empty()) return std::nullopt;
    std::size_t hits = 0;
    bool any_label = false;
    for (std::size_t i : declared) {
        if (train[i].label.has_value()) any_label = true;
        if (train[i].label == EventLabel::Exo) ++hits;
    }
    if (!any_label) return std::nullopt;
    return static_cast<double>(hits) / static_cast<double>(declared.size());
}

struct SweepPoint {
    double gamma;
    double lookahead_hours;
    double train_subset;  // fraction of the training set actually used
};

std::vector<SweepPoint> expand_sweep(const ExperimentConfig& cfg) {
    std::vector<SweepPoint> points;
    const SweepPoint base{cfg.gamma, cfg.lookahead_hours, 1.0};
    switch (cfg.sweep) {
        case SweepKind::None:
            points.push_back(base);
            break;
        case SweepKind::Gamma:
            for (double v : cfg.sweep_values) points.push_back({v, base.lookahead_hours, 1.0});
            break;
        case SweepKind::Horizon:
            for (double v : cfg.sweep_values) points.push_back({base.gamma, v, 1.0});
            break;
        case SweepKind::TrainSize:
            for (double v : cfg.sweep_values) points.push_back({base.gamma, base.lookahead_hours, v});
            break;
        case SweepKind::Noise:
        case SweepKind::SampleSize:
            throw InputError("synthetic sweep kind passed to a real-data experiment");
    }
    if (points.empty()) throw InputError("sweep requested with no values");
    return points;
}

}  // namespace

double mse(std::span<const std::pair<double, double>> pairs) {
    if (pairs.empty()) throw InputError("metrics need at least one prediction pair");
    double sum = 0.0;
    for (const auto& [actual, predicted] : pairs) {
        const double d = actual - predicted;
        sum += d * d;
    }
    return sum / static_cast<double>(pairs.size());
}

double failure_rate(std::span<const std::pair<double, double>> pairs) {
    if (pairs.empty()) throw InputError("metrics need at least one prediction pair");
    std::size_t failures = 0;
    for (const auto& [actual, predicted] : pairs)
        if (sgn(actual) != sgn(predicted)) ++failures;
    return static_cast<double>(failures) / static_cast<double>(pairs.size());
}

SweepKind parse_sweep_kind(const std::string& name) {
    if (name == "none") return SweepKind::None;
    if (name == "gamma") return SweepKind::Gamma;
    if (name == "horizon") return SweepKind::Horizon;
    if (name == "train_size") return SweepKind::TrainSize;
    if (name == "noise") return SweepKind::Noise;
    if (name == "sample_size") return SweepKind::SampleSize;
    throw InputError("unknown sweep kind '" + name + "'");
}

std::string sweep_kind_name(SweepKind kind) {
    switch (kind) {
        case SweepKind::None: return "none";
        case SweepKind::Gamma: return "gamma";
        case SweepKind::Horizon: return "horizon";
        case SweepKind::TrainSize: return "train_size";
        case SweepKind::Noise: return "noise";
        case SweepKind::SampleSize: return "sample_size";
    }
    return "?";
}

FittedMethod fit_method(const EventStream& train, const SocialGraph& graph,
                        const std::string& method, const ExperimentConfig& config) {
    FittedMethod out;
    if (is_criterion_method(method)) {
        EstimationResult r = estimate_all(train, graph, make_estimate_config(method, config, config.gamma));
        out.params = std::move(r.params);
        out.declared_exogenous = std::move(r.demarcation.exogenous);
        out.solver_trace = std::move(r.solver_trace);
    } else {
        BaselineModel m = fit_baseline_model(train, graph, make_baseline_config(method, config, config.gamma));
        out.params = std::move(m.params);
        out.declared_exogenous = std::move(m.outliers);
    }
    return out;
}

std::vector<MethodOutcome> run_forecast_experiment(const EventStream& stream,
                                                   const SocialGraph& graph,
                                                   const ExperimentConfig& config) {
    const SplitResult base_split = split(stream, SplitSpec{config.train_fraction});
    if (base_split.test.empty())
        throw InputError("forecast experiment needs a non-empty test split");
    const std::size_t test_offset = base_split.train.size();

    std::vector<MethodOutcome> out;
    for (const SweepPoint& point : expand_sweep(config)) {
        ExperimentConfig cfg = config;
        cfg.gamma = point.gamma;
        cfg.lookahead_hours = point.lookahead_hours;

        EventStream train = base_split.train;
        if (point.train_subset < 1.0) {
            const auto keep = static_cast<std::size_t>(
                std::floor(point.train_subset * static_cast<double>(base_split.train.size())));
            std::vector<Event> sub(base_split.train.events().begin(),
                                   base_split.train.events().begin() + keep);
            // The reduced training window ends where the discarded suffix
            // starts, so compensators do not integrate over a silent tail.
            const double sub_horizon = keep < base_split.train.size()
                                           ? base_split.train[keep].time
                                           : base_split.train.horizon();
            train = EventStream(std::move(sub), sub_horizon);
        }

        for (const std::string& method : config.methods) {
            const auto t0 = std::chrono::steady_clock::now();
            FittedMethod fitted = fit_method(train, graph, method, cfg);
            auto predictions =
                forecast_test_events(stream, base_split.test, test_offset, fitted.params, graph, cfg);
            const auto t1 = std::chrono::steady_clock::now();

            MethodOutcome outcome;
            outcome.row = score_predictions(predictions);
            outcome.row.method = method;
            outcome.row.gamma = cfg.gamma;
            outcome.row.lookahead_hours = cfg.lookahead_hours;
            outcome.row.precision = exo_precision(fitted.declared_exogenous, train);
            outcome.row.runtime_seconds = std::chrono::duration<double>(t1 - t0).count();
            outcome.predictions = std::move(predictions);
            out.push_back(std::move(outcome));
        }
    }
    return out;
}

std::vector<MethodOutcome> run_sanitized_test(const EventStream& stream, const SocialGraph& graph,
                                              const ExperimentConfig& config) {
    const SplitResult base_split = split(stream, SplitSpec{config.train_fraction});
    if (base_split.test.empty())
        throw InputError("sanitized test needs a non-empty test split");
    const std::size_t test_offset = base_split.train.size();

    std::vector<MethodOutcome> out;
    for (const std::string& method : config.methods) {
        if (!is_criterion_method(method))
            throw InputError("sanitized test applies to criterion methods, got '" + method + "'");

        const auto t0 = std::chrono::steady_clock::now();
        FittedMethod fitted = fit_method(base_split.train, graph, method, config);
        auto predictions =
            forecast_test_events(stream, base_split.test, test_offset, fitted.params, graph, config);

        MethodOutcome plain;
        plain.row = score_predictions(predictions);
        plain.row.method = method;
        plain.row.gamma = config.gamma;
        plain.row.lookahead_hours = config.lookahead_hours;
        plain.predictions = predictions;

        // Demarcate the full stream and keep only test events classified as
        // endogenous.
        const EstimateConfig ec = make_estimate_config(method, config, config.gamma);
        const DemarcationResult full_split = cherry_pick(stream, graph, ec.demarcation);
        std::vector<char> keep(stream.size(), 0);
        for (std::size_t i : full_split.endogenous) keep[i] = 1;

        std::vector<PredictionRow> sanitized;
        for (const auto& p : predictions)
            if (keep[p.event_index]) sanitized.push_back(p);
        if (sanitized.empty())
            throw InputError("sanitized test retained no test events; lower gamma");
        const auto t1 = std::chrono::steady_clock::now();

        MethodOutcome clean;
        clean.row = score_predictions(sanitized);
        clean.row.method = method + ":sanitized";
        clean.row.gamma = config.gamma;
        clean.row.lookahead_hours = config.lookahead_hours;
        clean.row.runtime_seconds = std::chrono::duration<double>(t1 - t0).count();
        clean.predictions = std::move(sanitized);
        plain.row.runtime_seconds = clean.row.runtime_seconds;

        out.push_back(std::move(plain));
        out.push_back(std::move(clean));
    }
    return out;
}

SocialGraph make_synthetic_graph(const SyntheticConfig& config, std::uint64_t seed) {
    if (config.graph_kind == "ba")
        return generate_barabasi_albert(config.n_users, config.ba_m, seed);
    if (config.graph_kind == "kronecker_cp")
        return generate_kronecker({{{0.9, 0.5}, {0.5, 0.3}}}, config.kron_power, seed);
    if (config.graph_kind == "kronecker_random")
        return generate_kronecker({{{0.5, 0.5}, {0.5, 0.5}}}, config.kron_power, seed);
    throw InputError("unknown graph kind '" + config.graph_kind +
                     "', expected ba|kronecker_cp|kronecker_random");
}

std::vector<MethodOutcome> run_synthetic_suite(const SyntheticConfig& config) {
    struct Point {
        double noise_mean;
        double noise_std;
        double noise_prior_std;
        double events_per_node;
    };
    std::vector<Point> points;
    const ExperimentConfig& base = config.base;
    switch (base.sweep) {
        case SweepKind::None:
            points.push_back({config.noise_mean, config.noise_std, config.noise_mean_prior_std,
                              config.events_per_node});
            break;
        case SweepKind::Noise:
            // Fixed-mean noise profile: variance 0.05, no stream-level prior.
            for (double v : base.sweep_values)
                points.push_back({v, std::sqrt(0.05), 0.0, config.events_per_node});
            break;
        case SweepKind::SampleSize:
            for (double v : base.sweep_values)
                points.push_back({config.noise_mean, config.noise_std,
                                  config.noise_mean_prior_std, v});
            break;
        default:
            throw InputError("real-data sweep kind passed to the synthetic suite");
    }
    if (points.empty()) throw InputError("sweep requested with no values");

    std::vector<MethodOutcome> out;
    for (std::size_t pi = 0; pi < points.size(); ++pi) {
        const Point& pt = points[pi];
        const std::uint64_t seed = base.rng_seed + 7919 * pi;

        const SocialGraph graph = make_synthetic_graph(config, seed);
        const ModelParams truth = sample_params(graph, seed + 1, base.kernels);

        SimConfig sim;
        sim.exo_probability = config.exo_probability;
        sim.exo_mark_mean_offset = pt.noise_mean;
        sim.exo_mark_std = pt.noise_std;
        sim.exo_mark_mean_prior_std = pt.noise_prior_std;
        sim.rng_seed = seed + 2;
        sim.target_events_per_node = pt.events_per_node;
        const EventStream stream = simulate_stream(graph, truth, sim);

        const SplitResult sp = split(stream, SplitSpec{base.train_fraction});
        const std::size_t test_offset = sp.train.size();

        for (const std::string& method : base.methods) {
            const auto t0 = std::chrono::steady_clock::now();
            FittedMethod fitted = fit_method(sp.train, graph, method, base);
            auto predictions =
                forecast_test_events(stream, sp.test, test_offset, fitted.params, graph, base);
            const auto t1 = std::chrono::steady_clock::now();

            MethodOutcome outcome;
            outcome.row = score_predictions(predictions);
            outcome.row.method = method;
            outcome.row.gamma = base.gamma;
            outcome.row.lookahead_hours = base.lookahead_hours;
            outcome.row.param_mse = opinion_param_mse(fitted.params, truth);
            outcome.row.precision = exo_precision(fitted.declared_exogenous, sp.train);
            outcome.row.runtime_seconds = std::chrono::duration<double>(t1 - t0).count();
            outcome.predictions = std::move(predictions);
            out.push_back(std::move(outcome));
        }
    }
    return out;
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, bool timing_in_csv,
                       const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    out << "method,gamma,lookahead,mse,fr,param_mse,precision,runtime_s\n";
    for (const MetricsRow& r : rows) {
        out << r.method << "," << detail::format_double(r.gamma) << ","
            << detail::format_double(r.lookahead_hours) << "," << detail::format_double(r.mse)
            << "," << detail::format_double(r.failure_rate) << ",";
        if (r.param_mse) out << detail::format_double(*r.param_mse);
        out << ",";
        if (r.precision) out << detail::format_double(*r.precision);
        out << ",";
        out << detail::format_double(timing_in_csv ? r.runtime_seconds : 0.0) << "\n";
    }
}

std::vector<MetricsRow> load_metrics_csv(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    const std::string name = path.string();
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw FormatError(name, 1, "empty metrics file");
    ++line_no;
    if (detail::strip(line) != "method,gamma,lookahead,mse,fr,param_mse,precision,runtime_s")
        throw FormatError(name, line_no, "unexpected metrics header");

    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::strip(line).empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 8) throw FormatError(name, line_no, "expected 8 fields");
        MetricsRow r;
        r.method = detail::strip(f[0]);
        r.gamma = detail::parse_double(f[1], name, line_no);
        r.lookahead_hours = detail::parse_double(f[2], name, line_no);
        r.mse = detail::parse_double(f[3], name, line_no);
        r.failure_rate = detail::parse_double(f[4], name, line_no);
        if (!detail::strip(f[5]).empty()) r.param_mse = detail::parse_double(f[5], name, line_no);
        if (!detail::strip(f[6]).empty()) r.precision = detail::parse_double(f[6], name, line_no);
        r.runtime_seconds = detail::parse_double(f[7], name, line_no);
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_predictions_csv(const std::vector<PredictionRow>& rows,
                           const std::filesystem::path& path) {
    auto out = detail::open_output(path);
    out << "event_index,m,m_hat\n";
    for (const PredictionRow& r : rows)
        out << r.event_index << "," << detail::format_double(r.actual) << ","
            << detail::format_double(r.predicted) << "\n";
}

std::string sha256_file(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr) throw NumericError("cannot allocate hash context");
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);

    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

}  // namespace opdyn
