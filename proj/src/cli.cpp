#include "opdyn/cli.hpp"

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "opdyn/detail/csv.hpp"
#include "opdyn/errors.hpp"
#include "opdyn/harness.hpp"

namespace opdyn::cli {

namespace {

namespace fs = std::filesystem;

struct CommonOptions {
    std::string events_path;
    std::string graph_path;
    std::string out_dir = "out";
    std::vector<std::string> methods = {"D"};
    double gamma = 0.2;
    double c = 1.0;
    double sigma = 1.0;
    double omega = 1000.0;
    double nu = 10.0;
    double lookahead_hours = 4.0;
    double hours_to_time = 3600.0;
    double train_fraction = 0.9;
    std::size_t forecast_samples = 10;
    double huber_c = 1.0;
    double c1 = 1e-3;
    double c2 = 1.0;
    unsigned threads = 1;
    std::uint64_t seed = 0;
    bool timing = false;
};

void add_model_flags(CLI::App* app, CommonOptions& o) {
    app->set_config("--config", "", "key=value config file; explicit flags win");
    app->add_option("--gamma", o.gamma, "presumed exogenous fraction");
    app->add_option("--c", o.c, "ridge constant");
    app->add_option("--sigma", o.sigma, "mark noise scale");
    app->add_option("--omega", o.omega, "opinion kernel decay rate");
    app->add_option("--nu", o.nu, "intensity kernel decay rate");
    app->add_option("--threads", o.threads, "worker threads");
    app->add_option("--seed", o.seed, "RNG seed");
}

ExperimentConfig to_experiment_config(const CommonOptions& o) {
    ExperimentConfig cfg;
    cfg.methods = o.methods;
    cfg.gamma = o.gamma;
    cfg.ridge_c = o.c;
    cfg.sigma = o.sigma;
    cfg.kernels = Kernels{o.omega, o.nu};
    cfg.lookahead_hours = o.lookahead_hours;
    cfg.hours_to_time = o.hours_to_time;
    cfg.train_fraction = o.train_fraction;
    cfg.n_forecast_samples = o.forecast_samples;
    cfg.huber_c = o.huber_c;
    cfg.c1 = o.c1;
    cfg.c2 = o.c2;
    cfg.n_threads = o.threads;
    cfg.rng_seed = o.seed;
    cfg.timing_in_csv = o.timing;
    return cfg;
}

nlohmann::json config_echo(const CommonOptions& o) {
    nlohmann::json j;
    j["methods"] = o.methods;
    j["gamma"] = o.gamma;
    j["c"] = o.c;
    j["sigma"] = o.sigma;
    j["omega"] = o.omega;
    j["nu"] = o.nu;
    j["lookahead_hours"] = o.lookahead_hours;
    j["hours_to_time"] = o.hours_to_time;
    j["train_fraction"] = o.train_fraction;
    j["forecast_samples"] = o.forecast_samples;
    j["threads"] = o.threads;
    j["seed"] = o.seed;
    return j;
}

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const CommonOptions& o, const nlohmann::json& extra,
                    double wall_seconds) {
    nlohmann::json j;
    j["command"] = command;
    j["config"] = config_echo(o);
    for (auto& [k, v] : extra.items()) j[k] = v;

    nlohmann::json inputs = nlohmann::json::object();
    if (!o.events_path.empty() && fs::exists(o.events_path))
        inputs["events"] = {{"path", o.events_path}, {"sha256", sha256_file(o.events_path)}};
    if (!o.graph_path.empty() && fs::exists(o.graph_path))
        inputs["graph"] = {{"path", o.graph_path}, {"sha256", sha256_file(o.graph_path)}};
    j["inputs"] = inputs;
    j["wall_seconds"] = wall_seconds;
    detail::open_output(out_dir / "manifest.json") << j.dump(2) << "\n";
}

std::pair<EventStream, SocialGraph> load_inputs(const CommonOptions& o) {
    if (o.events_path.empty() || o.graph_path.empty())
        throw InputError("--events and --graph are required");
    if (!fs::exists(o.events_path)) throw InputError("missing events file: " + o.events_path);
    if (!fs::exists(o.graph_path)) throw InputError("missing graph file: " + o.graph_path);
    return {load_events(o.events_path), load_graph(o.graph_path)};
}

void write_outcomes(const std::vector<MethodOutcome>& outcomes, bool timing,
                    const fs::path& out_dir) {
    std::vector<MetricsRow> rows;
    rows.reserve(outcomes.size());
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        rows.push_back(outcomes[i].row);
        std::string tag = outcomes[i].row.method;
        std::replace(tag.begin(), tag.end(), ':', '_');
        write_predictions_csv(outcomes[i].predictions,
                              out_dir / ("predictions_" + std::to_string(i) + "_" + tag + ".csv"));
    }
    write_metrics_csv(rows, timing, out_dir / "metrics.csv");
}

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"opdyn: demarcation-aware opinion dynamics toolkit"};
    app.require_subcommand(1);
    CommonOptions o;

    // --- simulate ---------------------------------------------------------
    auto* sim = app.add_subcommand("simulate", "generate a synthetic labeled stream");
    std::string sim_graph_kind = "ba";
    std::size_t sim_users = 128;
    std::size_t sim_ba_m = 2;
    unsigned sim_kron_power = 9;
    double sim_horizon = 10.0;
    double sim_events_per_node = 0.0;
    double sim_exo_prob = 0.2;
    double sim_exo_mean_offset = 0.0;
    double sim_exo_prior_std = 1.0;
    double sim_exo_std = std::sqrt(0.1);
    sim->add_option("--graph", o.graph_path, "existing graph CSV (otherwise generated)");
    sim->add_option("--graph-kind", sim_graph_kind, "ba|kronecker_cp|kronecker_random");
    sim->add_option("--users", sim_users, "users for generated graphs");
    sim->add_option("--ba-m", sim_ba_m, "attachment links per new node");
    sim->add_option("--kron-power", sim_kron_power, "Kronecker power");
    sim->add_option("--horizon", sim_horizon, "simulation horizon");
    sim->add_option("--events-per-node", sim_events_per_node,
                    "extend the horizon until this mean per-user count (0 = fixed horizon)");
    sim->add_option("--exo-prob", sim_exo_prob, "exogenous mark probability");
    sim->add_option("--exo-mean-offset", sim_exo_mean_offset, "exogenous mark mean offset");
    sim->add_option("--exo-prior-std", sim_exo_prior_std, "std of the stream-level mean draw");
    sim->add_option("--exo-std", sim_exo_std, "exogenous mark std");
    sim->add_option("--out", o.out_dir, "output directory");
    add_model_flags(sim, o);

    // --- demarcate --------------------------------------------------------
    auto* dem = app.add_subcommand("demarcate", "split a stream into endo/exo events");
    std::string dem_criterion = "D";
    dem->add_option("--criterion", dem_criterion, "A|D|E|T")->required();
    dem->add_option("--events", o.events_path)->required();
    dem->add_option("--graph", o.graph_path)->required();
    dem->add_option("--out", o.out_dir, "output directory");
    add_model_flags(dem, o);

    // --- estimate ---------------------------------------------------------
    auto* est = app.add_subcommand("estimate", "demarcate then fit model parameters");
    std::string est_method = "D";
    bool est_trace = false;
    est->add_option("--method", est_method, "A|D|E|T|huber|lasso|hard|soft|slant");
    est->add_option("--events", o.events_path)->required();
    est->add_option("--graph", o.graph_path)->required();
    est->add_flag("--trace", est_trace, "dump the intensity solver trace CSV");
    est->add_option("--out", o.out_dir, "output directory");
    add_model_flags(est, o);

    // --- forecast ---------------------------------------------------------
    auto* fc = app.add_subcommand("forecast", "predict held-out sentiments with a fitted model");
    std::string fc_params;
    fc->add_option("--events", o.events_path)->required();
    fc->add_option("--graph", o.graph_path)->required();
    fc->add_option("--params", fc_params, "fitted params JSON")->required();
    fc->add_option("--lookahead-hours", o.lookahead_hours);
    fc->add_option("--hours-to-time", o.hours_to_time);
    fc->add_option("--train-fraction", o.train_fraction);
    fc->add_option("--samples", o.forecast_samples);
    fc->add_option("--out", o.out_dir, "output directory");
    add_model_flags(fc, o);

    // --- bench ------------------------------------------------------------
    auto* bench = app.add_subcommand("bench", "full split/fit/forecast benchmark");
    bool bench_sanitized = false;
    bench->add_option("--method", o.methods, "methods to run");
    bench->add_option("--events", o.events_path)->required();
    bench->add_option("--graph", o.graph_path)->required();
    bench->add_option("--lookahead-hours", o.lookahead_hours);
    bench->add_option("--hours-to-time", o.hours_to_time);
    bench->add_option("--train-fraction", o.train_fraction);
    bench->add_option("--samples", o.forecast_samples);
    bench->add_option("--huber-c", o.huber_c);
    bench->add_option("--c1", o.c1);
    bench->add_option("--c2", o.c2);
    bench->add_flag("--sanitized", bench_sanitized, "also score the demarcated test set");
    bench->add_flag("--timing", o.timing, "write wall times into metrics.csv");
    bench->add_option("--out", o.out_dir, "output directory");
    add_model_flags(bench, o);

    // --- sweep ------------------------------------------------------------
    auto* sweep = app.add_subcommand("sweep", "run a method grid over a swept parameter");
    std::string sweep_kind = "gamma";
    std::vector<double> sweep_values;
    std::string sweep_graph_kind = "ba";
    std::size_t sweep_users = 128;
    std::size_t sweep_ba_m = 2;
    unsigned sweep_kron_power = 9;
    double sweep_events_per_node = 50.0;
    double sweep_exo_prob = 0.2;
    sweep->add_option("--kind", sweep_kind, "gamma|horizon|train_size|noise|sample_size")
        ->required();
    sweep->add_option("--values", sweep_values, "swept values")->required()->delimiter(',');
    sweep->add_option("--method", o.methods, "methods to run");
    sweep->add_option("--events", o.events_path, "events CSV (real-data sweeps)");
    sweep->add_option("--graph", o.graph_path, "graph CSV (real-data sweeps)");
    sweep->add_option("--graph-kind", sweep_graph_kind, "synthetic sweeps");
    sweep->add_option("--users", sweep_users);
    sweep->add_option("--ba-m", sweep_ba_m);
    sweep->add_option("--kron-power", sweep_kron_power);
    sweep->add_option("--events-per-node", sweep_events_per_node);
    sweep->add_option("--exo-prob", sweep_exo_prob);
    sweep->add_option("--lookahead-hours", o.lookahead_hours);
    sweep->add_option("--hours-to-time", o.hours_to_time);
    sweep->add_option("--train-fraction", o.train_fraction);
    sweep->add_option("--samples", o.forecast_samples);
    sweep->add_option("--huber-c", o.huber_c);
    sweep->add_option("--c1", o.c1);
    sweep->add_option("--c2", o.c2);
    sweep->add_flag("--timing", o.timing, "write wall times into metrics.csv");
    sweep->add_option("--out", o.out_dir, "output directory");
    add_model_flags(sweep, o);

    std::vector<const char*> argv;
    argv.push_back("opdyn");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    const auto wall0 = std::chrono::steady_clock::now();
    const fs::path out_dir = o.out_dir;
    fs::create_directories(out_dir);
    const auto wall = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    };

    if (sim->parsed()) {
        SocialGraph graph;
        if (!o.graph_path.empty()) {
            graph = load_graph(o.graph_path);
        } else {
            SyntheticConfig sc;
            sc.graph_kind = sim_graph_kind;
            sc.n_users = sim_users;
            sc.ba_m = sim_ba_m;
            sc.kron_power = sim_kron_power;
            graph = make_synthetic_graph(sc, o.seed);
            save_graph(graph, out_dir / "graph.csv");
        }
        const ModelParams params = sample_params(graph, o.seed + 1, Kernels{o.omega, o.nu});
        SimConfig sc;
        sc.horizon = sim_horizon;
        sc.exo_probability = sim_exo_prob;
        sc.exo_mark_mean_offset = sim_exo_mean_offset;
        sc.exo_mark_mean_prior_std = sim_exo_prior_std;
        sc.exo_mark_std = sim_exo_std;
        sc.rng_seed = o.seed + 2;
        if (sim_events_per_node > 0.0) sc.target_events_per_node = sim_events_per_node;
        const EventStream stream = simulate_stream(graph, params, sc);
        save_events(stream, out_dir / "events.csv");
        save_params(params, graph, out_dir / "true_params.json");
        nlohmann::json extra;
        extra["sim"] = {{"horizon", stream.horizon()},
                        {"n_events", stream.size()},
                        {"exo_probability", sim_exo_prob},
                        {"exo_mean_offset", sim_exo_mean_offset},
                        {"exo_prior_std", sim_exo_prior_std},
                        {"exo_std", sim_exo_std}};
        write_manifest(out_dir, "simulate", o, extra, wall());
        std::cout << "simulated " << stream.size() << " events over horizon " << stream.horizon()
                  << "\n";
        return 0;
    }

    if (dem->parsed()) {
        auto [stream, graph] = load_inputs(o);
        DemarcationConfig dc;
        dc.criterion = parse_criterion(dem_criterion.at(0));
        dc.gamma = o.gamma;
        dc.c = o.c;
        dc.sigma = o.sigma;
        dc.kernels = Kernels{o.omega, o.nu};
        dc.n_threads = o.threads;
        const DemarcationResult result = cherry_pick(stream, graph, dc);
        save_demarcation(result, stream.size(), out_dir / "demarcation.csv");
        write_manifest(out_dir, "demarcate", o,
                       {{"criterion", dem_criterion},
                        {"n_endogenous", result.endogenous.size()},
                        {"n_exogenous", result.exogenous.size()}},
                       wall());
        std::cout << "kept " << result.endogenous.size() << " endogenous / "
                  << result.exogenous.size() << " exogenous events\n";
        return 0;
    }

    if (est->parsed()) {
        auto [stream, graph] = load_inputs(o);
        const ExperimentConfig cfg = to_experiment_config(o);
        const FittedMethod fitted = fit_method(stream, graph, est_method, cfg);
        save_params(fitted.params, graph, out_dir / "params.json");
        DemarcationResult as_result;
        for (std::size_t i = 0; i < stream.size(); ++i) as_result.endogenous.push_back(i);
        // Re-express the declared-exogenous set in the result CSV format.
        if (!fitted.declared_exogenous.empty()) {
            std::vector<char> exo(stream.size(), 0);
            for (std::size_t i : fitted.declared_exogenous) exo[i] = 1;
            as_result.endogenous.clear();
            for (std::size_t i = 0; i < stream.size(); ++i)
                if (!exo[i]) as_result.endogenous.push_back(i);
            as_result.exogenous = fitted.declared_exogenous;
        }
        as_result.gains.assign(as_result.endogenous.size(), 0.0);
        save_demarcation(as_result, stream.size(), out_dir / "demarcation.csv");
        if (est_trace && !fitted.solver_trace.empty()) {
            auto trace_out = detail::open_output(out_dir / "solver_trace.csv");
            trace_out << "iter,loglik,grad_norm\n";
            for (const auto& row : fitted.solver_trace)
                trace_out << row.iter << "," << detail::format_double(row.loglik) << ","
                          << detail::format_double(row.grad_norm) << "\n";
        }
        write_manifest(out_dir, "estimate", o, {{"method", est_method}}, wall());
        std::cout << "fitted parameters written to " << (out_dir / "params.json").string() << "\n";
        return 0;
    }

    if (fc->parsed()) {
        auto [stream, graph] = load_inputs(o);
        const ModelParams params = load_params(fc_params, graph);
        const SplitResult sp = split(stream, SplitSpec{o.train_fraction});
        if (sp.test.empty()) throw InputError("empty test split");
        std::vector<PredictionRow> rows(sp.test.size());
        const double lookahead = o.lookahead_hours * o.hours_to_time;
        for (std::size_t k = 0; k < sp.test.size(); ++k) {
            const Event& e = sp.test[k];
            ForecastConfig fcfg;
            fcfg.lookahead = lookahead;
            fcfg.n_samples = o.forecast_samples;
            fcfg.rng_seed = o.seed + 1000003 * (sp.train.size() + k);
            fcfg.n_threads = o.threads;
            rows[k] = PredictionRow{sp.train.size() + k, e.sentiment,
                                    forecast(e.user, e.time, stream, params, graph, fcfg)};
        }
        write_predictions_csv(rows, out_dir / "predictions.csv");
        std::vector<std::pair<double, double>> pairs;
        for (const auto& r : rows) pairs.emplace_back(r.actual, r.predicted);
        write_manifest(out_dir, "forecast", o,
                       {{"mse", mse(pairs)}, {"fr", failure_rate(pairs)}}, wall());
        std::cout << "mse " << mse(pairs) << " fr " << failure_rate(pairs) << "\n";
        return 0;
    }

    if (bench->parsed()) {
        auto [stream, graph] = load_inputs(o);
        const ExperimentConfig cfg = to_experiment_config(o);
        auto outcomes = run_forecast_experiment(stream, graph, cfg);
        if (bench_sanitized) {
            auto sanitized = run_sanitized_test(stream, graph, cfg);
            for (auto& s : sanitized) outcomes.push_back(std::move(s));
        }
        write_outcomes(outcomes, o.timing, out_dir);
        write_manifest(out_dir, "bench", o, {{"rows", outcomes.size()}}, wall());
        std::cout << "wrote " << outcomes.size() << " metric rows to "
                  << (out_dir / "metrics.csv").string() << "\n";
        return 0;
    }

    if (sweep->parsed()) {
        ExperimentConfig cfg = to_experiment_config(o);
        cfg.sweep = parse_sweep_kind(sweep_kind);
        cfg.sweep_values = sweep_values;

        std::vector<MethodOutcome> outcomes;
        if (cfg.sweep == SweepKind::Noise || cfg.sweep == SweepKind::SampleSize) {
            SyntheticConfig sc;
            sc.base = cfg;
            sc.graph_kind = sweep_graph_kind;
            sc.n_users = sweep_users;
            sc.ba_m = sweep_ba_m;
            sc.kron_power = sweep_kron_power;
            sc.events_per_node = sweep_events_per_node;
            sc.exo_probability = sweep_exo_prob;
            outcomes = run_synthetic_suite(sc);
        } else {
            auto [stream, graph] = load_inputs(o);
            outcomes = run_forecast_experiment(stream, graph, cfg);
        }
        write_outcomes(outcomes, o.timing, out_dir);
        write_manifest(out_dir, "sweep", o,
                       {{"kind", sweep_kind}, {"values", sweep_values}, {"rows", outcomes.size()}},
                       wall());
        std::cout << "wrote " << outcomes.size() << " metric rows to "
                  << (out_dir / "metrics.csv").string() << "\n";
        return 0;
    }

    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    try {
        return dispatch(args);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const OrderingError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const SizeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    }
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args);
}

}  // namespace opdyn::cli
