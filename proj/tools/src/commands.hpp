#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "inn/config.hpp"

namespace inn::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitConfig = 2,
    kExitIo = 3,
    kExitDivergence = 4,
    kExitMetricUndefined = 5,
};

// Flags shared by every subcommand.
struct CommonOptions {
    std::string config_path;
    std::string scale = "paper";
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;  // key=value
    std::filesystem::path out_dir = "out";
    std::string data_path;                 // optional dataset file
    std::vector<std::string> checkpoints;  // command-specific meaning
    bool quiet = false;
};

struct SweepOptions {
    bool with_probout = true;
    bool skip_noise = false;
    std::optional<std::size_t> seeds;
};

RunConfig resolve_config(const CommonOptions& opt);

int gen_data(const CommonOptions& opt);
int train_base_cmd(const CommonOptions& opt);
int train_inn_cmd(const CommonOptions& opt);
int train_probout_cmd(const CommonOptions& opt);
int eval_cmd(const CommonOptions& opt);
int noise_sweep_cmd(const CommonOptions& opt, const SweepOptions& sweep);
int direction_sweep_cmd(const CommonOptions& opt);
int repro_cmd(const CommonOptions& opt, const SweepOptions& sweep);

} // namespace inn::cli
