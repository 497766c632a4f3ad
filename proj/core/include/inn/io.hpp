#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "inn/baselines.hpp"
#include "inn/deconv.hpp"
#include "inn/interval.hpp"
#include "inn/network.hpp"

namespace inn {

// ---- Checkpoints -----------------------------------------------------------
//
// Layout (all integers and floats little-endian, floats IEEE-754 binary64):
//   "INNCKPT1"                      8 bytes
//   u32 version (= 1)
//   u8  kind                        0 point network, 1 interval network, 2 ProbOut
//   u64 input channels, u64 input length
//   u64 layer count
//   per layer: u8 kind, u64 in, u64 out, u64 kernel, f64 dropout p
//   per linear layer: weight block, bias block (point parameters)
//   kind 1 only: u8 mask bit per linear layer, then per linear layer
//                weight lower, weight upper, bias lower, bias upper blocks
//   metadata: u64 seed, u64 epochs, f64 lr, f64 beta

enum class ModelKind : std::uint8_t { Point = 0, Interval = 1, ProbOut = 2 };

struct CheckpointMeta {
    std::uint64_t seed = 0;
    std::uint64_t epochs = 0;
    double lr = 0.0;
    double beta = 0.0;
    friend bool operator==(const CheckpointMeta&, const CheckpointMeta&) = default;
};

struct Checkpoint {
    ModelKind kind = ModelKind::Point;
    Network network;                        // point / ProbOut network, or the INN base
    std::optional<IntervalNetwork> interval;  // present iff kind == Interval
    CheckpointMeta meta;
};

std::string encode_checkpoint(const Network& net, ModelKind kind, const CheckpointMeta& meta);
std::string encode_checkpoint(const IntervalNetwork& inn, const CheckpointMeta& meta);
// Throws CorruptionError (bad magic, truncation, shape errors) or
// ContainmentError (interval bounds that do not contain the point weights).
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Network& net, const CheckpointMeta& meta = {});
void save_checkpoint(const std::filesystem::path& path, const IntervalNetwork& inn, const CheckpointMeta& meta = {});
void save_checkpoint(const std::filesystem::path& path, const ProbOutNetwork& net, const CheckpointMeta& meta = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

// ---- Dataset files ---------------------------------------------------------
//
//   "INND1" 5 bytes, u32 version (= 1), u64 n, u64 m, f64 sigma, u64 seed,
//   f64 gamma, then m*n f64 inputs (row-major), then m*n f64 targets.

std::string encode_dataset(const DeconvDataset& data);
DeconvDataset decode_dataset(const std::string& bytes);
void save_dataset(const std::filesystem::path& path, const DeconvDataset& data);
DeconvDataset load_dataset(const std::filesystem::path& path);

// ---- Text artifacts --------------------------------------------------------

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

// Shortest-safe decimal: 17 significant digits, round-trips exactly.
std::string format_double(double v);

using CsvRow = std::vector<std::string>;

struct CsvTable {
    CsvRow header;
    std::vector<CsvRow> rows;
};

std::string to_csv(const CsvTable& table);
CsvTable parse_csv(const std::string& text);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#1f77b4";
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    int width = 640;
    int height = 400;
};

/// Minimal SVG polyline chart with axes, tick labels and a legend.
std::string render_svg_lineplot(const std::vector<PlotSeries>& series, const PlotSpec& spec);
void emit_svg_lineplot(const std::filesystem::path& path, const std::vector<PlotSeries>& series,
                       const PlotSpec& spec);

// FNV-1a 64-bit hash, used for manifest fingerprints.
std::uint64_t fnv1a64(const std::string& bytes);

} // namespace inn
