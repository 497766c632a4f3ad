#include "commands.hpp"

#include <chrono>
#include <cstdio>
#include <iostream>

#include "inn/error.hpp"
#include "inn/experiment.hpp"

namespace inn::cli {

namespace {

using Clock = std::chrono::steady_clock;

class Logger {
public:
    explicit Logger(bool quiet) : quiet_(quiet) {}
    void operator()(const std::string& line) const {
        if (!quiet_) std::cerr << line << '\n';
    }

private:
    bool quiet_;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

RunHooks progress_hooks(const Logger& log) {
    RunHooks h;
    h.on_base_epoch = [log](const EpochLog& l) {
        log("base  epoch " + std::to_string(l.epoch + 1) + " loss " + fmt("%.6g", l.loss));
    };
    h.on_inn_epoch = [log](const InnEpochLog& l) {
        log("inn   epoch " + std::to_string(l.epoch + 1) + " loss " + fmt("%.6g", l.loss) + " width " +
            fmt("%.6g", l.mean_width));
    };
    h.on_probout_epoch = [log](const EpochLog& l) {
        log("probout epoch " + std::to_string(l.epoch + 1) + " loss " + fmt("%.6g", l.loss));
    };
    return h;
}

DeconvDataset dataset_for(const CommonOptions& opt, const RunConfig& cfg) {
    if (!opt.data_path.empty()) {
        auto data = load_dataset(opt.data_path);
        if (data.n() != cfg.data.n)
            throw ConfigError(opt.data_path + " has n = " + std::to_string(data.n()) + " but data.n = " +
                              std::to_string(cfg.data.n));
        return data;
    }
    return make_dataset(cfg, cfg.data.sigma, cfg.data.noise, cfg.seed);
}

const std::string& checkpoint_arg(const CommonOptions& opt, std::size_t i, const char* what) {
    if (opt.checkpoints.size() <= i) throw ConfigError(std::string("missing --checkpoint for the ") + what);
    return opt.checkpoints[i];
}

Network load_point(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    if (ck.kind != ModelKind::Point) throw ConfigError(path + " is not a point-network checkpoint");
    return std::move(ck.network);
}

void write_manifest(const CommonOptions& opt, const RunConfig& cfg, const std::string& command, Clock::time_point t0,
                    std::vector<std::pair<std::string, std::uint64_t>> passes = {}) {
    Manifest m;
    m.command = command;
    m.scale = parse_scale(opt.scale);
    m.seed = cfg.seed;
    m.config_text = to_text(cfg);
    m.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    m.passes_per_query = std::move(passes);
    write_file(opt.out_dir / "manifest.txt", render_manifest(m));
}

std::vector<std::pair<std::string, std::uint64_t>> pass_counts(const EvalReport& rep) {
    std::vector<std::pair<std::string, std::uint64_t>> out;
    for (const auto& m : rep.methods) out.emplace_back(m.method, m.passes_per_query);
    return out;
}

void plot_direction(const std::filesystem::path& path, const std::vector<DirectionPoint>& curve) {
    PlotSeries acc{"accuracy", {}, {}, "#1f77b4"};
    PlotSeries prop{"proportion", {}, {}, "#ff7f0e"};
    for (const auto& p : curve) {
        if (p.accuracy) {
            acc.x.push_back(p.threshold);
            acc.y.push_back(*p.accuracy);
        }
        prop.x.push_back(p.threshold);
        prop.y.push_back(p.proportion);
    }
    emit_svg_lineplot(path, {acc, prop}, {"Directional information", "half ratio threshold", "fraction"});
}

void plot_noise(const std::filesystem::path& path, const std::vector<NoisePoint>& points) {
    PlotSeries inn{"INN width", {}, {}, "#2ca02c"};
    PlotSeries mc{"MCDrop std", {}, {}, "#1f77b4"};
    PlotSeries po{"ProbOut std", {}, {}, "#d62728"};
    for (const auto& p : points) {
        inn.x.push_back(p.sigma);
        inn.y.push_back(p.inn_width);
        mc.x.push_back(p.sigma);
        mc.y.push_back(p.mcdrop_std);
        po.x.push_back(p.sigma);
        po.y.push_back(p.probout_std);
    }
    emit_svg_lineplot(path, {inn, mc, po}, {"Noise behavior", "noise sigma", "mean uncertainty"});
}

void write_eval_artifacts(const std::filesystem::path& dir, const RunConfig& cfg,
                          const std::vector<EvalReport>& runs) {
    write_csv(dir / "report.csv", report_table(runs));
    write_csv(dir / "markov.csv", markov_table(runs.front()));
    write_csv(dir / "direction.csv", direction_table(runs.front().direction));
    plot_direction(dir / "direction.svg", runs.front().direction);
    write_sample_plots(dir, runs.front(), cfg.eval.plots);
}

void log_summary(const Logger& log, const EvalReport& rep) {
    log("beta " + fmt("%.6g", rep.beta) + "  test coverage " + fmt("%.4f", rep.coverage_test) + "  train coverage " +
        fmt("%.4f", rep.coverage_train) + "  mean width " + fmt("%.6g", rep.mean_width_test));
    for (const auto& m : rep.methods)
        log(m.method + ": mse " + fmt("%.6g", m.mse) + "  pwcc " + fmt("%.6g", m.pwcc.mean) + " (skipped " +
            std::to_string(m.pwcc.skipped) + ")  passes/query " + std::to_string(m.passes_per_query));
}

int undefined_status(const EvalReport& rep, const Logger& log) {
    const auto& inn = scores_of(rep, "inn");
    if (inn.pwcc.values.empty()) {
        log("PWCC is undefined on every test sample (constant interval widths)");
        return kExitMetricUndefined;
    }
    return kExitOk;
}

} // namespace

RunConfig resolve_config(const CommonOptions& opt) {
    const Scale scale = parse_scale(opt.scale);
    RunConfig cfg = default_config(scale);
    if (!opt.config_path.empty()) {
        auto parsed = parse_config(read_file(opt.config_path), scale);
        for (const auto& w : parsed.warnings) std::cerr << "warning: " << opt.config_path << ": " << w << '\n';
        cfg = std::move(parsed.config);
    }
    for (const auto& kv : opt.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        auto trim = [](std::string s) {
            s.erase(0, s.find_first_not_of(" \t"));
            s.erase(s.find_last_not_of(" \t") + 1);
            return s;
        };
        set_config_value(cfg, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
    }
    if (opt.seed) cfg.seed = *opt.seed;
    validate(cfg);
    return cfg;
}

int gen_data(const CommonOptions& opt) {
    const auto t0 = Clock::now();
    const RunConfig cfg = resolve_config(opt);
    const auto data = make_dataset(cfg, cfg.data.sigma, cfg.data.noise, cfg.seed);
    save_dataset(opt.out_dir / "data.innd", data);
    write_manifest(opt, cfg, "gen-data", t0);
    Logger(opt.quiet)("wrote " + (opt.out_dir / "data.innd").string());
    return kExitOk;
}

int train_base_cmd(const CommonOptions& opt) {
    const auto t0 = Clock::now();
    const Logger log(opt.quiet);
    const RunConfig cfg = resolve_config(opt);
    const auto data = dataset_for(opt, cfg);
    const Network base = train_base(cfg, data, cfg.seed, progress_hooks(log).on_base_epoch);
    save_checkpoint(opt.out_dir / "base.ckpt", base, {cfg.seed, cfg.base.epochs, cfg.base.lr, 0.0});
    write_manifest(opt, cfg, "train-base", t0);
    log("test mse " + fmt("%.6g", mse(predict(base, data.x_of(data.test)), data.y_of(data.test))));
    return kExitOk;
}

int train_inn_cmd(const CommonOptions& opt) {
    const auto t0 = Clock::now();
    const Logger log(opt.quiet);
    const RunConfig cfg = resolve_config(opt);
    const auto data = dataset_for(opt, cfg);
    const Network base = load_point(checkpoint_arg(opt, 0, "base network"));
    const double beta = choose_beta(cfg, base, data);
    log("beta " + fmt("%.6g", beta));
    auto res = train_inn(base, data.x_of(data.train), data.y_of(data.train), inn_train_config(cfg, beta, cfg.seed), {},
                         progress_hooks(log).on_inn_epoch);
    save_checkpoint(opt.out_dir / "inn.ckpt", res.inn, {cfg.seed, cfg.inn.epochs, cfg.inn.lr, beta});
    write_manifest(opt, cfg, "train-inn", t0);
    return kExitOk;
}

int train_probout_cmd(const CommonOptions& opt) {
    const auto t0 = Clock::now();
    const Logger log(opt.quiet);
    const RunConfig cfg = resolve_config(opt);
    const auto data = dataset_for(opt, cfg);
    const Network base = load_point(checkpoint_arg(opt, 0, "base network"));
    TrainConfig pc;
    pc.epochs = cfg.probout.epochs;
    pc.lr = cfg.probout.lr;
    pc.batch = cfg.probout.batch;
    pc.seed = derive_seed(cfg.seed, kStreamProbOut);
    auto res = train_probout(base, data.x_of(data.train), data.y_of(data.train), pc, progress_hooks(log).on_probout_epoch);
    save_checkpoint(opt.out_dir / "probout.ckpt", res.net, {cfg.seed, cfg.probout.epochs, cfg.probout.lr, 0.0});
    write_manifest(opt, cfg, "train-probout", t0);
    return kExitOk;
}

namespace {

struct LoadedModels {
    Network base;
    IntervalNetwork inn;
    std::optional<ProbOutNetwork> probout;
    double beta = 0.0;
};

// Accepts any mix of point, interval and ProbOut checkpoints. A point
// checkpoint without an interval one is evaluated with point intervals.
LoadedModels load_models(const CommonOptions& opt, const RunConfig& cfg, const DeconvDataset& data) {
    if (opt.checkpoints.empty()) throw ConfigError("eval needs --checkpoint (base, INN and/or ProbOut)");
    LoadedModels m;
    std::optional<Network> base;
    std::optional<IntervalNetwork> inn;
    for (const auto& path : opt.checkpoints) {
        Checkpoint ck = load_checkpoint(path);
        switch (ck.kind) {
        case ModelKind::Point: base = std::move(ck.network); break;
        case ModelKind::Interval:
            inn = std::move(*ck.interval);
            if (ck.meta.beta > 0.0) m.beta = ck.meta.beta;
            break;
        case ModelKind::ProbOut: m.probout = ProbOutNetwork(std::move(ck.network)); break;
        }
    }
    if (inn) {
        m.base = inn->base();
        m.inn = std::move(*inn);
    } else if (base) {
        m.base = std::move(*base);
        m.inn = IntervalNetwork(m.base);
    } else {
        throw ConfigError("eval needs a base or INN checkpoint");
    }
    if (m.base.input_shape().length != data.n())
        throw ConfigError("checkpoint input length " + std::to_string(m.base.input_shape().length) +
                          " does not match data.n = " + std::to_string(data.n()));
    if (!(m.beta > 0.0)) m.beta = choose_beta(cfg, m.base, data);
    return m;
}

} // namespace

int eval_cmd(const CommonOptions& opt) {
    const auto t0 = Clock::now();
    const Logger log(opt.quiet);
    const RunConfig cfg = resolve_config(opt);
    const auto data = dataset_for(opt, cfg);
    const LoadedModels models = load_models(opt, cfg, data);
    EvalInputs in{&models.base, &models.inn, models.probout ? &*models.probout : nullptr, true};
    const EvalReport rep = evaluate(cfg, data, in, models.beta, cfg.seed);
    write_eval_artifacts(opt.out_dir, cfg, {rep});
    write_manifest(opt, cfg, "eval", t0, pass_counts(rep));
    log_summary(log, rep);
    return undefined_status(rep, log);
}

int direction_sweep_cmd(const CommonOptions& opt) {
    const auto t0 = Clock::now();
    const Logger log(opt.quiet);
    const RunConfig cfg = resolve_config(opt);
    const auto data = dataset_for(opt, cfg);
    const LoadedModels models = load_models(opt, cfg, data);
    const Tensor x = data.x_of(data.test);
    const auto iv = interval_forward(models.inn, x);
    const auto curve = direction_sweep(predict(models.base, x), iv.lower, iv.upper, data.y_of(data.test),
                                       cfg.eval.thresholds);
    write_csv(opt.out_dir / "direction.csv", direction_table(curve));
    plot_direction(opt.out_dir / "direction.svg", curve);
    write_manifest(opt, cfg, "direction-sweep", t0);
    for (const auto& p : curve)
        log("threshold " + fmt("%g", p.threshold) + "  accuracy " +
            (p.accuracy ? fmt("%.4f", *p.accuracy) : std::string("n/a")) + "  proportion " +
            fmt("%.4f", p.proportion));
    return kExitOk;
}

int noise_sweep_cmd(const CommonOptions& opt, const SweepOptions& sweep) {
    const auto t0 = Clock::now();
    const Logger log(opt.quiet);
    const RunConfig cfg = resolve_config(opt);
    const auto points = noise_sweep(cfg, cfg.seed, sweep.with_probout, [&log](const NoisePoint& p) {
        log("sigma " + fmt("%g", p.sigma) + "  inn width " + fmt("%.6g", p.inn_width) + "  mcdrop std " +
            fmt("%.6g", p.mcdrop_std) + "  probout std " + fmt("%.6g", p.probout_std));
    });
    write_csv(opt.out_dir / "noise.csv", noise_table(points));
    plot_noise(opt.out_dir / "noise.svg", points);
    write_manifest(opt, cfg, "noise-sweep", t0);
    return kExitOk;
}

int repro_cmd(const CommonOptions& opt, const SweepOptions& sweep) {
    const auto t0 = Clock::now();
    const Logger log(opt.quiet);
    RunConfig cfg = resolve_config(opt);
    if (sweep.seeds) cfg.eval.seeds = *sweep.seeds;

    std::vector<EvalReport> runs;
    for (std::size_t k = 0; k < cfg.eval.seeds; ++k) {
        const std::uint64_t seed = cfg.seed + k;
        log("== run " + std::to_string(k) + " (seed " + std::to_string(seed) + ")");
        RunArtifacts run = run_pipeline(cfg, seed, progress_hooks(log), sweep.with_probout);
        log_summary(log, run.report);
        if (k == 0) {
            save_checkpoint(opt.out_dir / "base.ckpt", run.base, {seed, cfg.base.epochs, cfg.base.lr, 0.0});
            save_checkpoint(opt.out_dir / "inn.ckpt", run.inn, {seed, cfg.inn.epochs, cfg.inn.lr, run.beta});
            if (sweep.with_probout)
                save_checkpoint(opt.out_dir / "probout.ckpt", run.probout,
                                {seed, cfg.probout.epochs, cfg.probout.lr, 0.0});
        }
        runs.push_back(std::move(run.report));
    }
    write_eval_artifacts(opt.out_dir, cfg, runs);

    if (!sweep.skip_noise) {
        log("== noise sweep");
        const auto points = noise_sweep(cfg, cfg.seed, sweep.with_probout, [&log](const NoisePoint& p) {
            log("sigma " + fmt("%g", p.sigma) + "  inn width " + fmt("%.6g", p.inn_width));
        });
        write_csv(opt.out_dir / "noise.csv", noise_table(points));
        plot_noise(opt.out_dir / "noise.svg", points);
    }
    write_manifest(opt, cfg, "repro-1ddeconv", t0, pass_counts(runs.front()));
    return undefined_status(runs.front(), log);
}

} // namespace inn::cli
