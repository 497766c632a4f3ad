#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "inn/deconv.hpp"

namespace inn {

enum class Scale { Paper, Desk };

Scale parse_scale(const std::string& text);
const char* scale_name(Scale s);

struct DataSection {
    std::size_t n = 512;
    std::size_t m = 2000;
    double sigma = 0.0;
    double gamma = 8.0;
    std::size_t jumps_min = 2;
    std::size_t jumps_max = 10;
    double value_lo = 0.0;
    double value_hi = 1.0;
    NoiseMode noise = NoiseMode::InputsOnly;
};

struct DropoutSite {
    std::size_t after_conv = 0;  // 1-based conv index; dropout follows its ReLU
    double p = 0.0;
    friend bool operator==(const DropoutSite&, const DropoutSite&) = default;
};

struct BaseSection {
    std::size_t epochs = 100;
    double lr = 1e-3;
    std::size_t batch = 256;
    std::vector<std::size_t> arch{16, 32, 64, 96, 128, 192, 256, 128, 32, 1};
    std::size_t kernel = 5;
    std::vector<DropoutSite> dropout{{7, 0.2}, {8, 0.5}, {9, 0.5}};
};

struct InnSection {
    std::size_t epochs = 100;
    double lr = 1e-5;
    std::optional<double> beta = 2e-3;  // empty: beta_mae_factor * validation MAE of the base
    double beta_mae_factor = 0.05;
    std::size_t batch = 256;
    std::string mask = "all";
    double width_ceiling = 1e3;
};

struct McDropSection {
    std::size_t samples = 64;
};

struct ProbOutSection {
    std::size_t epochs = 100;
    double lr = 1e-4;
    std::size_t batch = 256;
};

struct EvalSection {
    std::vector<double> lambda_grid{0.0, 1.0, 2.0, 4.0, 10.0};
    std::vector<double> thresholds{1.0, 1.5, 2.0, 3.0, 5.0, 10.0, 20.0, 50.0};
    std::vector<double> sigma_grid{0.0, 0.01, 0.02, 0.03, 0.04, 0.05};
    double alpha = 0.5;
    std::size_t seeds = 3;  // independent runs aggregated in the PWCC comparison
    std::size_t plots = 3;  // sample_k.svg overlays
};

struct RunConfig {
    DataSection data;
    BaseSection base;
    InnSection inn;
    McDropSection mcdrop;
    ProbOutSection probout;
    EvalSection eval;
    std::uint64_t seed = 0;
};

RunConfig default_config(Scale scale);

struct ParsedConfig {
    RunConfig config;
    std::vector<std::string> warnings;
};

/// Parses flat `key = value` lines on top of the defaults of `scale`.
/// `#` starts a comment. Unknown keys, malformed values and out-of-range
/// values throw ConfigError; a repeated key keeps the last value and warns.
ParsedConfig parse_config(const std::string& text, Scale scale = Scale::Paper);

/// Applies one override, e.g. from the command line.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Cross-field checks (jump range vs n, dropout sites vs arch, ...).
void validate(const RunConfig& cfg);

/// Canonical text form; parse_config(to_text(c)) == c. Used for the manifest hash.
std::string to_text(const RunConfig& cfg);

std::vector<std::string> config_keys();

} // namespace inn
