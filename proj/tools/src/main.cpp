#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "inn/error.hpp"

using namespace inn::cli;

namespace {

constexpr auto kLast = CLI::MultiOptionPolicy::TakeLast;

void add_common(CLI::App* cmd, CommonOptions& opt) {
    cmd->add_option("--config", opt.config_path, "key = value config file")
        ->multi_option_policy(kLast);
    cmd->add_option("--scale", opt.scale, "default set: paper or desk")
        ->check(CLI::IsMember({"paper", "desk"}))
        ->multi_option_policy(kLast);
    cmd->add_option("--seed", opt.seed, "run seed (overrides the config)")->multi_option_policy(kLast);
    cmd->add_option("--set", opt.overrides, "config override key=value (repeatable)");
    cmd->add_option("--out-dir", opt.out_dir, "artifact directory")->multi_option_policy(kLast);
    cmd->add_flag("--quiet,-q", opt.quiet, "no progress output");
}

void add_data(CLI::App* cmd, CommonOptions& opt) {
    cmd->add_option("--data", opt.data_path, "dataset file from gen-data (default: regenerate from config)")
        ->multi_option_policy(kLast);
}

void add_checkpoints(CLI::App* cmd, CommonOptions& opt, bool required) {
    auto* o = cmd->add_option("--checkpoint,--checkpoints", opt.checkpoints, "checkpoint file(s)");
    if (required) o->required();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interval neural networks for uncertainty quantification on 1D deconvolution"};
    app.require_subcommand(1);

    CommonOptions opt;
    SweepOptions sweep;

    auto* gen = app.add_subcommand("gen-data", "generate a dataset file (data.innd)");
    add_common(gen, opt);

    auto* base = app.add_subcommand("train-base", "train the underlying point network (base.ckpt)");
    add_common(base, opt);
    add_data(base, opt);

    auto* inn = app.add_subcommand("train-inn", "train interval bounds around a base checkpoint (inn.ckpt)");
    add_common(inn, opt);
    add_data(inn, opt);
    add_checkpoints(inn, opt, true);

    auto* po = app.add_subcommand("train-probout", "train the ProbOut baseline from a base checkpoint");
    add_common(po, opt);
    add_data(po, opt);
    add_checkpoints(po, opt, true);

    auto* ev = app.add_subcommand("eval", "score checkpoints on the test split");
    add_common(ev, opt);
    add_data(ev, opt);
    add_checkpoints(ev, opt, true);

    auto* noise = app.add_subcommand("noise-sweep", "retrain across the noise grid (noise.csv)");
    add_common(noise, opt);
    noise->add_flag("!--no-probout", sweep.with_probout, "skip the ProbOut baseline");

    auto* dir = app.add_subcommand("direction-sweep", "directional accuracy of an INN checkpoint (direction.csv)");
    add_common(dir, opt);
    add_data(dir, opt);
    add_checkpoints(dir, opt, true);

    auto* repro = app.add_subcommand("repro-1ddeconv", "full experiment: all models, seeds and sweeps");
    add_common(repro, opt);
    repro->add_flag("!--no-probout", sweep.with_probout, "skip the ProbOut baseline");
    repro->add_flag("--skip-noise", sweep.skip_noise, "skip the noise sweep");
    repro->add_option("--runs", sweep.seeds, "number of seeds (overrides eval.seeds)")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*gen) return gen_data(opt);
        if (*base) return train_base_cmd(opt);
        if (*inn) return train_inn_cmd(opt);
        if (*po) return train_probout_cmd(opt);
        if (*ev) return eval_cmd(opt);
        if (*noise) return noise_sweep_cmd(opt, sweep);
        if (*dir) return direction_sweep_cmd(opt);
        if (*repro) return repro_cmd(opt, sweep);
    } catch (const inn::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const inn::IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return kExitIo;
    } catch (const inn::DivergenceError& e) {
        std::cerr << "training diverged: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const inn::MetricUndefined& e) {
        std::cerr << "metric undefined: " << e.what() << '\n';
        return kExitMetricUndefined;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitFailure;
}
