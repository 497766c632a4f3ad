#include "inn/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>

#include "inn/error.hpp"
#include "inn/training.hpp"

namespace inn {

Network build_deconv_net(const RunConfig& cfg) {
    validate(cfg);
    const auto& arch = cfg.base.arch;
    std::vector<LayerSpec> specs;
    std::size_t in = 1;
    for (std::size_t i = 0; i < arch.size(); ++i) {
        specs.push_back(LayerSpec::conv1d(in, arch[i], cfg.base.kernel));
        in = arch[i];
        if (i + 1 == arch.size()) break;
        specs.push_back(LayerSpec::relu());
        for (const auto& d : cfg.base.dropout)
            if (d.after_conv == i + 1) specs.push_back(LayerSpec::dropout(d.p));
    }
    return Network(ActShape{1, cfg.data.n}, std::move(specs));
}

DeconvDataset make_dataset(const RunConfig& cfg, double sigma, NoiseMode mode, std::uint64_t run_seed) {
    OperatorSpec op{cfg.data.n, cfg.data.gamma};
    SignalSpec sig{cfg.data.n, cfg.data.jumps_min, cfg.data.jumps_max, cfg.data.value_lo, cfg.data.value_hi};
    return generate(op, sig, cfg.data.m, sigma, derive_seed(run_seed, kStreamData), mode);
}

Network train_base(const RunConfig& cfg, const DeconvDataset& data, std::uint64_t run_seed,
                   const EpochCallback& on_epoch) {
    Network net = build_deconv_net(cfg);
    Rng init(derive_seed(run_seed, kStreamBaseInit));
    net.init_params(init);
    TrainConfig tc;
    tc.epochs = cfg.base.epochs;
    tc.lr = cfg.base.lr;
    tc.batch = cfg.base.batch;
    tc.seed = derive_seed(run_seed, kStreamBaseTrain);
    train_mse(net, data.x_of(data.train), data.y_of(data.train), tc, on_epoch);
    return net;
}

double choose_beta(const RunConfig& cfg, const Network& base, const DeconvDataset& data) {
    if (cfg.inn.beta) return *cfg.inn.beta;
    const double b = cfg.inn.beta_mae_factor * beta_from_mae(base, data.x_of(data.val), data.y_of(data.val));
    if (!(b > 0.0)) throw MetricUndefined("MAE heuristic gave beta = 0; set inn.beta explicitly");
    return b;
}

InnTrainConfig inn_train_config(const RunConfig& cfg, double beta, std::uint64_t run_seed) {
    InnTrainConfig ic;
    ic.epochs = cfg.inn.epochs;
    ic.lr = cfg.inn.lr;
    ic.beta = beta;
    ic.batch = cfg.inn.batch;
    ic.mask = cfg.inn.mask;
    ic.seed = derive_seed(run_seed, kStreamInn);
    ic.width_ceiling = cfg.inn.width_ceiling;
    return ic;
}

namespace {

Tensor widths(const Tensor& lower, const Tensor& upper) {
    Tensor w = upper;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lower[i];
    return w;
}

Tensor sqrt_of(const Tensor& t) {
    Tensor out = t;
    for (auto& v : out.values()) v = std::sqrt(v);
    return out;
}

Tensor shuffle_within_rows(const Tensor& u, Rng& rng) {
    Tensor out = u;
    for (std::size_t r = 0; r < out.dim(0); ++r) {
        auto row = out.row(r);
        std::vector<double> tmp(row.begin(), row.end());
        const auto order = shuffled_indices(tmp.size(), rng);
        for (std::size_t j = 0; j < tmp.size(); ++j) row[j] = tmp[order[j]];
    }
    return out;
}

} // namespace

EvalReport evaluate(const RunConfig& cfg, const DeconvDataset& data, const EvalInputs& in, double beta,
                    std::uint64_t run_seed) {
    if (!in.base || !in.inn) throw ConfigError("evaluate needs a base network and an INN");
    EvalReport rep;
    rep.seed = run_seed;
    rep.beta = beta;

    const Tensor x_test = data.x_of(data.test);
    const Tensor y_test = data.y_of(data.test);
    const Tensor x_train = data.x_of(data.train);
    const Tensor y_train = data.y_of(data.train);

    rep.test_pred = predict(*in.base, x_test);
    rep.test_target = y_test;

    PassCounter inn_count;
    auto test_iv = interval_forward(*in.inn, x_test, &inn_count);
    rep.test_lower = std::move(test_iv.lower);
    rep.test_upper = std::move(test_iv.upper);
    const Tensor u = widths(rep.test_lower, rep.test_upper);
    rep.mean_width_test = mean_value(u);
    rep.coverage_test = coverage(rep.test_lower, rep.test_upper, y_test, 0.0, beta);

    auto train_iv = interval_forward(*in.inn, x_train);
    rep.coverage_train = coverage(train_iv.lower, train_iv.upper, y_train, 0.0, beta);
    rep.markov_train = markov_bound_check(train_iv.lower, train_iv.upper, y_train, cfg.eval.lambda_grid, beta);
    rep.markov_test = markov_bound_check(rep.test_lower, rep.test_upper, y_test, cfg.eval.lambda_grid, beta);
    rep.alpha_train =
        markov_alpha_check(train_iv.lower, train_iv.upper, y_train, cfg.eval.lambda_grid, cfg.eval.alpha, beta);
    rep.direction = direction_sweep(rep.test_pred, rep.test_lower, rep.test_upper, y_test, cfg.eval.thresholds);

    MethodScores inn_scores;
    inn_scores.method = "inn";
    inn_scores.mse = mse(rep.test_pred, y_test);
    inn_scores.pwcc = pwcc_batch(rep.test_pred, y_test, u);
    inn_scores.mean_uncertainty = rep.mean_width_test;
    inn_scores.passes_per_query = inn_count.passes;
    rep.methods.push_back(inn_scores);

    Rng shuffle_rng(derive_seed(run_seed, kStreamShuffle));
    rep.shuffled = pwcc_batch(rep.test_pred, y_test, shuffle_within_rows(u, shuffle_rng));

    if (in.run_mcdrop && in.base->has_dropout()) {
        PassCounter count;
        McDropConfig mc{cfg.mcdrop.samples, derive_seed(run_seed, kStreamMcDrop)};
        const auto res = mcdrop_predict(*in.base, x_test, mc, &count);
        MethodScores s;
        s.method = "mcdrop";
        s.mse = mse(res.mean, y_test);
        s.pwcc = pwcc_batch(res.mean, y_test, res.std);
        s.mean_uncertainty = mean_value(res.std);
        s.passes_per_query = count.passes;
        rep.methods.push_back(s);
    }
    if (in.probout) {
        PassCounter count;
        const auto res = probout_predict(*in.probout, x_test, &count);
        const Tensor sd = sqrt_of(res.variance);
        MethodScores s;
        s.method = "probout";
        s.mse = mse(res.mean, y_test);
        s.pwcc = pwcc_batch(res.mean, y_test, sd);
        s.mean_uncertainty = mean_value(sd);
        s.passes_per_query = count.passes;
        rep.methods.push_back(s);
    }
    return rep;
}

const MethodScores& scores_of(const EvalReport& report, const std::string& method) {
    for (const auto& m : report.methods)
        if (m.method == method) return m;
    throw ConfigError("report has no scores for method '" + method + "'");
}

RunArtifacts run_pipeline(const RunConfig& cfg, std::uint64_t run_seed, const RunHooks& hooks, bool with_probout) {
    RunArtifacts run;
    run.data = make_dataset(cfg, cfg.data.sigma, cfg.data.noise, run_seed);
    run.base = train_base(cfg, run.data, run_seed, hooks.on_base_epoch);
    run.beta = choose_beta(cfg, run.base, run.data);

    const Tensor x_train = run.data.x_of(run.data.train);
    const Tensor y_train = run.data.y_of(run.data.train);
    run.inn = train_inn(run.base, x_train, y_train, inn_train_config(cfg, run.beta, run_seed), hooks.on_inn_step,
                        hooks.on_inn_epoch)
                  .inn;

    EvalInputs in{&run.base, &run.inn, nullptr, true};
    if (with_probout) {
        TrainConfig pc;
        pc.epochs = cfg.probout.epochs;
        pc.lr = cfg.probout.lr;
        pc.batch = cfg.probout.batch;
        pc.seed = derive_seed(run_seed, kStreamProbOut);
        run.probout = train_probout(run.base, x_train, y_train, pc, hooks.on_probout_epoch).net;
        in.probout = &run.probout;
    }
    run.report = evaluate(cfg, run.data, in, run.beta, run_seed);
    return run;
}

std::vector<NoisePoint> noise_sweep(const RunConfig& cfg, std::uint64_t run_seed, bool with_probout,
                                    const std::function<void(const NoisePoint&)>& on_point) {
    std::vector<NoisePoint> points;
    std::optional<double> beta = cfg.inn.beta;
    for (double sigma : cfg.eval.sigma_grid) {
        RunConfig c = cfg;
        c.data.sigma = sigma;
        c.data.noise = NoiseMode::InputsAndTargets;
        RunArtifacts run;
        run.data = make_dataset(c, sigma, NoiseMode::InputsAndTargets, run_seed);
        run.base = train_base(c, run.data, run_seed);
        // One beta for the whole sweep, so widths respond to noise alone.
        if (!beta) beta = choose_beta(c, run.base, run.data);
        c.inn.beta = beta;
        const Tensor x_train = run.data.x_of(run.data.train);
        const Tensor y_train = run.data.y_of(run.data.train);
        run.inn = train_inn(run.base, x_train, y_train, inn_train_config(c, *beta, run_seed)).inn;
        EvalInputs in{&run.base, &run.inn, nullptr, true};
        if (with_probout) {
            TrainConfig pc;
            pc.epochs = c.probout.epochs;
            pc.lr = c.probout.lr;
            pc.batch = c.probout.batch;
            pc.seed = derive_seed(run_seed, kStreamProbOut);
            run.probout = train_probout(run.base, x_train, y_train, pc).net;
            in.probout = &run.probout;
        }
        const EvalReport rep = evaluate(c, run.data, in, *beta, run_seed);
        NoisePoint p;
        p.sigma = sigma;
        p.inn_width = rep.mean_width_test;
        p.inn_coverage = rep.coverage_test;
        p.base_mse = scores_of(rep, "inn").mse;
        for (const auto& m : rep.methods) {
            if (m.method == "mcdrop") p.mcdrop_std = m.mean_uncertainty;
            if (m.method == "probout") p.probout_std = m.mean_uncertainty;
        }
        points.push_back(p);
        if (on_point) on_point(p);
    }
    return points;
}

CsvTable report_table(const std::vector<EvalReport>& runs) {
    CsvTable t;
    t.header = {"run", "seed", "method", "metric", "value"};
    for (std::size_t r = 0; r < runs.size(); ++r) {
        const auto& rep = runs[r];
        auto add = [&](const std::string& method, const std::string& metric, const std::string& value) {
            t.rows.push_back({std::to_string(r), std::to_string(rep.seed), method, metric, value});
        };
        add("inn", "beta", format_double(rep.beta));
        add("inn", "coverage_test", format_double(rep.coverage_test));
        add("inn", "coverage_train", format_double(rep.coverage_train));
        add("inn", "mean_width_test", format_double(rep.mean_width_test));
        for (const auto& m : rep.methods) {
            add(m.method, "mse", format_double(m.mse));
            add(m.method, "pwcc_mean", format_double(m.pwcc.mean));
            add(m.method, "pwcc_std", format_double(m.pwcc.std));
            add(m.method, "pwcc_skipped", std::to_string(m.pwcc.skipped));
            add(m.method, "mean_uncertainty", format_double(m.mean_uncertainty));
            add(m.method, "passes_per_query", std::to_string(m.passes_per_query));
        }
        add("shuffled", "pwcc_mean", format_double(rep.shuffled.mean));
        add("shuffled", "pwcc_std", format_double(rep.shuffled.std));
        add("shuffled", "pwcc_skipped", std::to_string(rep.shuffled.skipped));
        double best = 0.0, best_prop = 0.0;
        for (const auto& d : rep.direction)
            if (d.accuracy && *d.accuracy > best) best = *d.accuracy, best_prop = d.proportion;
        add("inn", "direction_best_accuracy", format_double(best));
        add("inn", "direction_best_proportion", format_double(best_prop));
    }
    return t;
}

CsvTable markov_table(const EvalReport& report) {
    CsvTable t;
    t.header = {"seed", "split", "kind", "lambda", "alpha", "bound", "value", "margin", "pass"};
    const auto seed = std::to_string(report.seed);
    auto add_rows = [&](const std::vector<MarkovRow>& rows, const char* split) {
        for (const auto& r : rows)
            t.rows.push_back({seed, split, "markov", format_double(r.lambda), "", format_double(r.bound),
                              format_double(r.coverage), format_double(r.margin), r.pass ? "1" : "0"});
    };
    add_rows(report.markov_train, "train");
    add_rows(report.markov_test, "test");
    for (const auto& r : report.alpha_train)
        t.rows.push_back({seed, "train", "alpha", format_double(r.lambda), format_double(r.alpha),
                          format_double(r.bound), format_double(r.fraction), format_double(r.margin),
                          r.pass ? "1" : "0"});
    return t;
}

CsvTable direction_table(const std::vector<DirectionPoint>& curve) {
    CsvTable t;
    t.header = {"threshold", "accuracy", "proportion", "considered"};
    for (const auto& p : curve)
        t.rows.push_back({format_double(p.threshold), p.accuracy ? format_double(*p.accuracy) : "",
                          format_double(p.proportion), std::to_string(p.considered)});
    return t;
}

CsvTable noise_table(const std::vector<NoisePoint>& points) {
    CsvTable t;
    t.header = {"sigma", "inn_width", "mcdrop_std", "probout_std", "inn_coverage", "base_mse"};
    for (const auto& p : points)
        t.rows.push_back({format_double(p.sigma), format_double(p.inn_width), format_double(p.mcdrop_std),
                          format_double(p.probout_std), format_double(p.inn_coverage), format_double(p.base_mse)});
    return t;
}

void write_sample_plots(const std::filesystem::path& dir, const EvalReport& report, std::size_t count) {
    if (report.test_target.empty()) return;
    const std::size_t rows = report.test_target.dim(0);
    for (std::size_t k = 0; k < std::min(count, rows); ++k) {
        const auto n = report.test_target.row(k).size();
        std::vector<double> xs(n);
        for (std::size_t i = 0; i < n; ++i) xs[i] = static_cast<double>(i);
        auto series = [&](const char* label, const Tensor& t, const char* color) {
            const auto r = t.row(k);
            return PlotSeries{label, xs, std::vector<double>(r.begin(), r.end()), color};
        };
        std::vector<PlotSeries> s{series("target", report.test_target, "#000000"),
                                  series("prediction", report.test_pred, "#1f77b4"),
                                  series("lower", report.test_lower, "#d62728"),
                                  series("upper", report.test_upper, "#2ca02c")};
        PlotSpec spec{"test sample " + std::to_string(k), "index", "value"};
        emit_svg_lineplot(dir / ("sample_" + std::to_string(k) + ".svg"), s, spec);
    }
}

std::string render_manifest(const Manifest& m) {
    std::ostringstream out;
    out << "command = " << m.command << "\n";
    out << "scale = " << scale_name(m.scale) << "\n";
    out << "seed = " << m.seed << "\n";
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(fnv1a64(m.config_text)));
    out << "config_hash = " << hash << "\n";
    out << "wall_seconds = " << format_double(m.wall_seconds) << "\n";
    for (const auto& [method, passes] : m.passes_per_query)
        out << "passes_per_query." << method << " = " << passes << "\n";
    out << "\n[config]\n" << m.config_text;
    return out.str();
}

} // namespace inn
