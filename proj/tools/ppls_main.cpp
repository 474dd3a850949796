#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "ppls/bench.hpp"
#include "ppls/csv.hpp"
#include "ppls/inference.hpp"
#include "ppls/params_io.hpp"

namespace {

using namespace ppls;

constexpr const char* kVersion = "ppls 1.0.0 (params-format 1)";

struct SimulateArgs {
    int p = 50, q = 50, r = 5;
    long n = 2000;
    std::string noise = "low";
    std::string noise_law = "gaussian";
    double noise_nu = 5.0, noise_lambda = 1.0;
    std::uint64_t seed = 42;
    std::string out_x = "X.csv", out_y = "Y.csv", out_truth = "truth.json";
};

void run_simulate(const SimulateArgs& args) {
    double se2, sf2, sh2;
    if (args.noise == "low") {
        se2 = sf2 = 0.1;
        sh2 = 0.05;
    } else if (args.noise == "high") {
        se2 = sf2 = 0.5;
        sh2 = 0.25;
    } else {
        // explicit "e2,f2,h2"
        if (std::sscanf(args.noise.c_str(), "%lf,%lf,%lf", &se2, &sf2, &sh2) != 3)
            throw ConfigError("--noise must be low, high, or e2,f2,h2");
    }
    RngStream rng(args.seed);
    PplsParams truth = make_truth(args.p, args.q, args.r, se2, sf2, sh2, rng);
    NoiseLaw law = NoiseLaw::parse(args.noise_law);
    law.nu = args.noise_nu;
    law.lambda = args.noise_lambda;
    auto [X, Y] = sample_dataset(truth, args.n, law, rng);
    write_csv_matrix(args.out_x, X, "x");
    write_csv_matrix(args.out_y, Y, "y");
    save_params(args.out_truth, truth);
    std::cout << "wrote " << args.out_x << ", " << args.out_y << ", " << args.out_truth << "\n";
}

struct FitArgs {
    std::string x_path, y_path;
    std::string rank = "auto";
    std::string rank_grid;
    std::string criterion = "bic";
    std::string noise_mode = "v1";
    std::string solver = "bcd";
    int starts = 8;
    bool warm_start = true;
    std::string gaussianize = "none";
    std::uint64_t seed = 42;
    std::string out = "params.json";
    bool with_se = false;
    bool trace = false;
    double tol = 1e-6;
    int max_iters = 1000;
};

void run_fit(const FitArgs& args) {
    Matrix X_raw = read_csv_matrix(args.x_path);
    Matrix Y_raw = read_csv_matrix(args.y_path);
    if (X_raw.rows() != Y_raw.rows()) throw InputError("fit: X and Y row counts differ");

    TransformKind kind = parse_transform(args.gaussianize);
    Gaussianizer gx = Gaussianizer::fit(X_raw, kind);
    Gaussianizer gy = Gaussianizer::fit(Y_raw, kind);
    Matrix X = gx.transform(X_raw);
    Matrix Y = gy.transform(Y_raw);

    MultistartOptions opts;
    opts.solver = parse_solver(args.solver);
    opts.starts = args.starts;
    opts.warm_start = args.warm_start;
    opts.fit.tol = args.tol;
    opts.fit.max_iters = args.max_iters;

    RngStream rng(args.seed);
    int r = 0;
    if (args.rank == "auto") {
        const int cap = static_cast<int>(std::min(X.cols(), Y.cols())) - 1;
        int lo = 1, hi = std::min(8, cap);
        if (!args.rank_grid.empty() &&
            std::sscanf(args.rank_grid.c_str(), "%d..%d", &lo, &hi) != 2)
            throw ConfigError("--rank-grid must look like a..b");
        if (lo < 1 || hi > cap || lo > hi) throw ConfigError("--rank-grid out of range");
        std::vector<int> grid;
        for (int k = lo; k <= hi; ++k) grid.push_back(k);
        NoiseMode mode = (args.noise_mode == "v2") ? NoiseMode::V2 : NoiseMode::V1;
        RngStream sel_rng = rng.fork(1);
        RankSelectionResult sel =
            rank_select(X, Y, grid, hi, {args.criterion}, mode, opts, sel_rng);
        r = sel.selected.at(args.criterion);
        std::cerr << "selected rank " << r << " by " << args.criterion << "\n";
    } else {
        r = std::stoi(args.rank);
    }

    RngStream fit_rng = rng.fork(2);
    FitReport report = multistart_fit_data(X, Y, r, opts, fit_rng);
    if (args.trace) {
        for (std::size_t i = 0; i < report.objective_trace.size(); ++i)
            std::cerr << "iter " << i << " objective " << fmt17(report.objective_trace[i])
                      << "\n";
    }
    std::cerr << (report.converged ? "converged" : "NOT converged") << " after "
              << report.iterations << " iterations, objective "
              << fmt17(report.objective_trace.back()) << "\n";

    ParamsFileExtras extras;
    extras.mean_x = Vector(X.colwise().mean());
    extras.mean_y = Vector(Y.colwise().mean());
    extras.objective = report.objective_trace.back();
    extras.gamma = 1.0;
    extras.kappa = 1.0;
    if (kind != TransformKind::Identity) {
        extras.gaussianize_x = transform_name(kind);
        extras.gaussianize_y = transform_name(kind);
    }
    if (args.with_se) {
        SampleMoments moments = sample_moments(X, Y);
        ProjectedStats stats = projected_stats(report.params.W, report.params.C, moments,
                                               report.params.sigma_e2, report.params.sigma_f2);
        StandardErrors se = standard_errors(report.params, stats, moments.N);
        extras.se_theta_t2 = se.se_theta_t2;
        extras.se_b = se.se_b;
        extras.se_sigma_h2 = se.se_sigma_h2;
    }
    save_params(args.out, report.params, extras);
    std::cout << "wrote " << args.out << "\n";
    if (!report.converged) throw NumericalError("fit did not converge: " + report.diagnostic);
}

struct PredictArgs {
    std::string params_path, x_path;
    std::vector<double> alphas = {0.05};
    std::string out = "predictions.csv";
};

void run_predict(const PredictArgs& args) {
    auto [params, extras] = load_params(args.params_path);
    Matrix X = read_csv_matrix(args.x_path);
    Vector mean_x = extras.mean_x.value_or(Vector::Zero(params.p()));
    Vector mean_y = extras.mean_y.value_or(Vector::Zero(params.q()));
    PredictiveLaw law = make_law(params, mean_x, mean_y, extras.gamma.value_or(1.0),
                                 extras.kappa.value_or(1.0));

    Matrix mean = predictive_mean_rows(law, X);
    std::vector<std::vector<std::string>> rows;
    for (double alpha : args.alphas) {
        IntervalBounds bounds = intervals(law, X, alpha);
        for (long i = 0; i < X.rows(); ++i)
            for (int j = 0; j < mean.cols(); ++j)
                rows.push_back({std::to_string(i + 1), std::to_string(j + 1), fmt17(alpha),
                                fmt17(mean(i, j)), fmt17(bounds.lo(i, j)),
                                fmt17(bounds.hi(i, j))});
    }
    write_csv_rows(args.out, {"sample", "coord", "alpha", "mean", "lo", "hi"}, rows);
    std::cout << "wrote " << args.out << "\n";
}

struct EvaluateArgs {
    std::string pred_path, y_path;
    std::string out_metrics = "metrics.json";
    std::string out_calibration = "calibration.csv";
};

void run_evaluate(const EvaluateArgs& args) {
    Matrix pred_table = read_csv_matrix(args.pred_path);
    Matrix Y = read_csv_matrix(args.y_path);
    if (pred_table.cols() != 6)
        throw InputError("evaluate: prediction file must have columns sample,coord,alpha,mean,lo,hi");

    std::vector<double> alphas;
    for (int i = 0; i < pred_table.rows(); ++i) {
        double a = pred_table(i, 2);
        if (std::find(alphas.begin(), alphas.end(), a) == alphas.end()) alphas.push_back(a);
    }
    std::sort(alphas.begin(), alphas.end());

    const long n = Y.rows();
    const int q = static_cast<int>(Y.cols());
    Matrix mean = Matrix::Zero(n, q);
    std::vector<IntervalBounds> bounds(alphas.size());
    for (auto& b : bounds) {
        b.lo = Matrix::Zero(n, q);
        b.hi = Matrix::Zero(n, q);
    }
    for (int i = 0; i < pred_table.rows(); ++i) {
        long s = static_cast<long>(pred_table(i, 0)) - 1;
        int cdx = static_cast<int>(pred_table(i, 1)) - 1;
        double a = pred_table(i, 2);
        std::size_t adx = std::find(alphas.begin(), alphas.end(), a) - alphas.begin();
        if (s < 0 || s >= n || cdx < 0 || cdx >= q)
            throw InputError("evaluate: prediction index outside truth dimensions");
        mean(s, cdx) = pred_table(i, 3);
        bounds[adx].lo(s, cdx) = pred_table(i, 4);
        bounds[adx].hi(s, cdx) = pred_table(i, 5);
    }

    FoldMetrics metrics = evaluate(mean, bounds, Y, alphas);
    std::ofstream out(args.out_metrics);
    if (!out) throw InputError("cannot write " + args.out_metrics);
    out << "{\n  \"mse\": " << fmt17(metrics.mse) << ",\n  \"mae\": " << fmt17(metrics.mae)
        << ",\n  \"r2\": " << fmt17(metrics.r2) << ",\n  \"coverage\": {";
    for (std::size_t a = 0; a < alphas.size(); ++a)
        out << (a ? ", " : "") << "\"" << fmt17(alphas[a])
            << "\": " << fmt17(metrics.coverage(static_cast<int>(a)));
    out << "}\n}\n";

    std::vector<std::vector<std::string>> rows;
    for (std::size_t a = 0; a < alphas.size(); ++a)
        rows.push_back({fmt17(alphas[a]), fmt17(metrics.coverage(static_cast<int>(a))),
                        fmt17(std::abs(metrics.coverage(static_cast<int>(a)) -
                                       (1.0 - alphas[a])))});
    write_csv_rows(args.out_calibration, {"alpha", "coverage", "ace"}, rows);
    std::cout << "wrote " << args.out_metrics << " and " << args.out_calibration << "\n";
}

struct NoiseEstArgs {
    std::string x_path;
    int r = -1;
    int r_max = -1;
    std::string mode = "subspace";
    bool mp_correct = false;
};

void run_noise_est(const NoiseEstArgs& args) {
    if (args.mp_correct)
        throw ConfigError("--mp-correct is reserved and not implemented");
    Matrix X = read_csv_matrix(args.x_path);
    SampleMoments m = sample_moments(X, X);
    NoiseEstimate est;
    if (args.mode == "subspace") {
        if (args.r < 0) throw ConfigError("noise-est: --r required in subspace mode");
        est = noise_subspace_estimate(m.S_xx, args.r);
    } else if (args.mode == "full") {
        est = full_spectrum_estimate(m.S_xx);
    } else if (args.mode == "conservative") {
        if (args.r_max < 0) throw ConfigError("noise-est: --r-max required in conservative mode");
        est = conservative_estimate(m.S_xx, args.r_max);
    } else {
        throw ConfigError("noise-est: unknown mode " + args.mode);
    }
    std::cout << "{\"value\": " << fmt17(est.value) << ", \"mode\": \"" << est.mode_name()
              << "\", \"r\": " << est.rank << "}\n";
}

struct RankSelectArgs {
    std::string x_path, y_path;
    std::string grid = "1..8";
    std::string noise_mode = "v1";
    std::string solver = "bcd";
    int starts = 4;
    std::uint64_t seed = 42;
    std::string out = "rank_scores.csv";
};

void run_rank_select(const RankSelectArgs& args) {
    Matrix X = read_csv_matrix(args.x_path);
    Matrix Y = read_csv_matrix(args.y_path);
    int lo = 1, hi = 8;
    if (std::sscanf(args.grid.c_str(), "%d..%d", &lo, &hi) != 2)
        throw ConfigError("--rank-grid must look like a..b");
    std::vector<int> grid;
    for (int k = lo; k <= hi; ++k) grid.push_back(k);

    MultistartOptions opts;
    opts.solver = parse_solver(args.solver);
    opts.starts = args.starts;
    NoiseMode mode = (args.noise_mode == "v2") ? NoiseMode::V2 : NoiseMode::V1;
    RngStream rng(args.seed);
    RankSelectionResult sel =
        rank_select(X, Y, grid, hi, {"gap", "bic", "cvnll", "cvmse"}, mode, opts, rng);

    std::vector<std::vector<std::string>> rows;
    for (std::size_t gi = 0; gi < sel.grid.size(); ++gi) {
        for (const auto& [criterion, scores] : sel.scores) {
            rows.push_back({std::to_string(sel.grid[gi]), criterion, fmt17(scores[gi]),
                            std::to_string(sel.selected.at(criterion) == sel.grid[gi] ? 1 : 0),
                            fmt17(sel.noise_per_rank[gi].first),
                            fmt17(sel.noise_per_rank[gi].second)});
        }
    }
    write_csv_rows(args.out, {"r", "criterion", "score", "selected", "sigma_e2", "sigma_f2"},
                   rows);
    for (const auto& warning : sel.warnings) std::cerr << "warning: " << warning << "\n";
    std::cout << "wrote " << args.out << "\n";
}

struct BenchArgs {
    std::string study;
    std::string config_path;
    std::string out_dir = ".";
    bool full = false;
    std::uint64_t seed = 42;
    int jobs = 1;
    int trials = 0;
};

void run_bench(const BenchArgs& args) {
    StudyConfig config;
    if (!args.config_path.empty()) config = parse_study_config(args.config_path);
    if (!args.study.empty()) config.study = args.study;
    if (config.study.empty()) throw ConfigError("bench: --study or config file required");
    config.out_dir = args.out_dir;
    config.full = config.full || args.full;
    if (args.trials > 0) config.trials = args.trials;
    if (args.seed != 42 || config.seed == 0) config.seed = args.seed;
    config.jobs = std::max(config.jobs, args.jobs);

    std::filesystem::create_directories(config.out_dir);
    StudyResult result = run_study(config);
    write_study_csv(result, config.out_dir);
    std::cout << "wrote " << config.out_dir << "/" << result.study << "_long.csv and _summary.csv\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fixed-noise probabilistic partial least squares"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic dataset");
    sim_cmd->add_option("--p", sim.p);
    sim_cmd->add_option("--q", sim.q);
    sim_cmd->add_option("--r", sim.r);
    sim_cmd->add_option("--n", sim.n);
    sim_cmd->add_option("--noise", sim.noise, "low, high, or e2,f2,h2");
    sim_cmd->add_option("--noise-law", sim.noise_law, "gaussian, student_t, mixture, poisson");
    sim_cmd->add_option("--noise-nu", sim.noise_nu);
    sim_cmd->add_option("--noise-lambda", sim.noise_lambda);
    sim_cmd->add_option("--seed", sim.seed);
    sim_cmd->add_option("--out-x", sim.out_x);
    sim_cmd->add_option("--out-y", sim.out_y);
    sim_cmd->add_option("--out-truth", sim.out_truth);

    FitArgs fit;
    auto* fit_cmd = app.add_subcommand("fit", "Fit the PPLS model");
    fit_cmd->add_option("--x", fit.x_path)->required();
    fit_cmd->add_option("--y", fit.y_path)->required();
    fit_cmd->add_option("--rank", fit.rank, "integer or 'auto'");
    fit_cmd->add_option("--rank-grid", fit.rank_grid, "a..b grid for rank selection");
    fit_cmd->add_option("--criterion", fit.criterion)
        ->check(CLI::IsMember({"bic", "cvnll", "cvmse", "gap"}));
    fit_cmd->add_option("--noise-mode", fit.noise_mode)->check(CLI::IsMember({"v1", "v2"}));
    fit_cmd->add_option("--solver", fit.solver)->check(CLI::IsMember({"manifold", "bcd"}));
    fit_cmd->add_option("--starts", fit.starts);
    fit_cmd->add_option("--warm-start", fit.warm_start);
    fit_cmd->add_option("--gaussianize", fit.gaussianize)
        ->check(CLI::IsMember({"none", "log", "rankint"}));
    fit_cmd->add_option("--seed", fit.seed);
    fit_cmd->add_option("--out", fit.out);
    fit_cmd->add_flag("--with-se", fit.with_se);
    fit_cmd->add_flag("--trace", fit.trace);
    fit_cmd->add_option("--tol", fit.tol);
    fit_cmd->add_option("--max-iters", fit.max_iters);

    PredictArgs pred;
    auto* pred_cmd = app.add_subcommand("predict", "Predict y from x under fitted parameters");
    pred_cmd->add_option("--params", pred.params_path)->required();
    pred_cmd->add_option("--x", pred.x_path)->required();
    pred_cmd->add_option("--alpha", pred.alphas);
    pred_cmd->add_option("--out", pred.out);

    EvaluateArgs eval;
    auto* eval_cmd = app.add_subcommand("evaluate", "Score predictions against ground truth");
    eval_cmd->add_option("--pred", eval.pred_path)->required();
    eval_cmd->add_option("--y", eval.y_path)->required();
    eval_cmd->add_option("--out-metrics", eval.out_metrics);
    eval_cmd->add_option("--out-calibration", eval.out_calibration);

    NoiseEstArgs noise;
    auto* noise_cmd = app.add_subcommand("noise-est", "Spectral noise estimate for one view");
    noise_cmd->add_option("--x", noise.x_path)->required();
    noise_cmd->add_option("--r", noise.r);
    noise_cmd->add_option("--r-max", noise.r_max);
    noise_cmd->add_option("--mode", noise.mode)
        ->check(CLI::IsMember({"subspace", "full", "conservative"}));
    noise_cmd->add_flag("--mp-correct", noise.mp_correct, "reserved; errors if set");

    RankSelectArgs rank;
    auto* rank_cmd = app.add_subcommand("rank-select", "Score candidate ranks");
    rank_cmd->add_option("--x", rank.x_path)->required();
    rank_cmd->add_option("--y", rank.y_path)->required();
    rank_cmd->add_option("--rank-grid", rank.grid);
    rank_cmd->add_option("--noise-mode", rank.noise_mode)->check(CLI::IsMember({"v1", "v2"}));
    rank_cmd->add_option("--solver", rank.solver)->check(CLI::IsMember({"manifold", "bcd"}));
    rank_cmd->add_option("--starts", rank.starts);
    rank_cmd->add_option("--seed", rank.seed);
    rank_cmd->add_option("--out", rank.out);

    BenchArgs bench;
    auto* bench_cmd = app.add_subcommand("bench", "Monte-Carlo studies");
    bench_cmd->add_option("--study", bench.study,
                          "ppca-verify, bias-floor, signal-sweep, recovery, calibration, "
                          "rank-selection, non-gaussian");
    bench_cmd->add_option("--config", bench.config_path, "flat key=value config file");
    bench_cmd->add_option("--out", bench.out_dir);
    bench_cmd->add_flag("--full", bench.full, "paper-scale dimensions");
    bench_cmd->add_option("--seed", bench.seed);
    bench_cmd->add_option("--jobs", bench.jobs);
    bench_cmd->add_option("--trials", bench.trials);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);  // prints usage/help text
        return code == 0 ? 0 : 1;
    }

    try {
        if (*sim_cmd) run_simulate(sim);
        else if (*fit_cmd) run_fit(fit);
        else if (*pred_cmd) run_predict(pred);
        else if (*eval_cmd) run_evaluate(eval);
        else if (*noise_cmd) run_noise_est(noise);
        else if (*rank_cmd) run_rank_select(rank);
        else if (*bench_cmd) run_bench(bench);
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
