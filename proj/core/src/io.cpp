#include "inn/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "inn/error.hpp"

namespace inn {

namespace {

constexpr char kCheckpointMagic[] = "INNCKPT1";
constexpr char kDatasetMagic[] = "INND1";
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
public:
    void bytes(const char* p, std::size_t n) { out_.append(p, n); }
    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void block(const Tensor& t) {
        for (double v : t.values()) f64(v);
    }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class Reader {
public:
    Reader(const std::string& data, const char* what) : data_(data), what_(what) {}

    void need(std::size_t n) const {
        if (pos_ + n > data_.size())
            throw CorruptionError(std::string(what_) + " is truncated at byte " + std::to_string(pos_));
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(data_[pos_++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    void block(Tensor& t) {
        need(8 * t.size());
        for (auto& v : t.values()) v = f64();
    }
    bool done() const { return pos_ == data_.size(); }

private:
    const std::string& data_;
    const char* what_;
    std::size_t pos_ = 0;
};

void write_architecture(Writer& w, const Network& net) {
    w.u64(net.input_shape().channels);
    w.u64(net.input_shape().length);
    w.u64(net.layer_count());
    for (const auto& layer : net.layers()) {
        w.u8(static_cast<std::uint8_t>(layer.spec.kind));
        w.u64(layer.spec.in);
        w.u64(layer.spec.out);
        w.u64(layer.spec.kernel);
        w.f64(layer.spec.p);
    }
    for (const auto* p : net.parameters()) w.block(*p);
}

Network read_architecture(Reader& r) {
    ActShape input{};
    input.channels = r.u64();
    input.length = r.u64();
    const std::uint64_t count = r.u64();
    if (count == 0 || count > 4096) throw CorruptionError("checkpoint layer count " + std::to_string(count) + " is invalid");
    std::vector<LayerSpec> specs;
    for (std::uint64_t i = 0; i < count; ++i) {
        LayerSpec s;
        const auto kind = r.u8();
        if (kind > static_cast<std::uint8_t>(LayerKind::Dropout))
            throw CorruptionError("checkpoint has unknown layer kind " + std::to_string(kind));
        s.kind = static_cast<LayerKind>(kind);
        s.in = r.u64();
        s.out = r.u64();
        s.kernel = r.u64();
        s.p = r.f64();
        specs.push_back(s);
    }
    Network net;
    try {
        net = Network(input, specs);
    } catch (const Error& e) {
        throw CorruptionError(std::string("checkpoint architecture is invalid: ") + e.what());
    }
    for (auto* p : net.parameters()) r.block(*p);
    return net;
}

void write_meta(Writer& w, const CheckpointMeta& meta) {
    w.u64(meta.seed);
    w.u64(meta.epochs);
    w.f64(meta.lr);
    w.f64(meta.beta);
}

} // namespace

std::string encode_checkpoint(const Network& net, ModelKind kind, const CheckpointMeta& meta) {
    if (kind == ModelKind::Interval) throw ConfigError("use the IntervalNetwork overload for interval checkpoints");
    Writer w;
    w.bytes(kCheckpointMagic, 8);
    w.u32(kFormatVersion);
    w.u8(static_cast<std::uint8_t>(kind));
    write_architecture(w, net);
    write_meta(w, meta);
    return w.take();
}

std::string encode_checkpoint(const IntervalNetwork& inn, const CheckpointMeta& meta) {
    Writer w;
    w.bytes(kCheckpointMagic, 8);
    w.u32(kFormatVersion);
    w.u8(static_cast<std::uint8_t>(ModelKind::Interval));
    write_architecture(w, inn.base());
    for (std::size_t q = 0; q < inn.linear_count(); ++q) w.u8(inn.trainable(q) ? 1 : 0);
    for (std::size_t q = 0; q < inn.linear_count(); ++q) {
        const auto& b = inn.bounds(q);
        w.block(b.weight_lower);
        w.block(b.weight_upper);
        w.block(b.bias_lower);
        w.block(b.bias_upper);
    }
    write_meta(w, meta);
    return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
    Reader r(bytes, "checkpoint");
    if (bytes.size() < 8 || bytes.compare(0, 8, kCheckpointMagic) != 0)
        throw CorruptionError("not a checkpoint: bad magic");
    r.bytes(8);
    const auto version = r.u32();
    if (version != kFormatVersion) throw CorruptionError("unsupported checkpoint version " + std::to_string(version));
    const auto kind = r.u8();
    if (kind > static_cast<std::uint8_t>(ModelKind::ProbOut))
        throw CorruptionError("unknown checkpoint kind " + std::to_string(kind));

    Checkpoint ck;
    ck.kind = static_cast<ModelKind>(kind);
    ck.network = read_architecture(r);
    if (ck.kind == ModelKind::Interval) {
        const std::size_t nlin = ck.network.linear_layers().size();
        std::vector<bool> bits(nlin);
        for (std::size_t q = 0; q < nlin; ++q) bits[q] = r.u8() != 0;
        IntervalNetwork inn;
        try {
            inn = IntervalNetwork(ck.network, LayerMask(bits));
        } catch (const Error& e) {
            throw CorruptionError(std::string("checkpoint interval architecture is invalid: ") + e.what());
        }
        for (std::size_t q = 0; q < nlin; ++q) {
            IntervalBounds b = inn.bounds(q);
            r.block(b.weight_lower);
            r.block(b.weight_upper);
            r.block(b.bias_lower);
            r.block(b.bias_upper);
            inn.set_bounds(q, std::move(b));
        }
        if (!inn.contains_base())
            throw ContainmentError("checkpoint interval bounds do not contain the point parameters");
        ck.interval = std::move(inn);
    } else if (ck.kind == ModelKind::ProbOut && ck.network.output_shape().size() % 2 != 0) {
        throw CorruptionError("ProbOut checkpoint has an odd output size");
    }
    ck.meta.seed = r.u64();
    ck.meta.epochs = r.u64();
    ck.meta.lr = r.f64();
    ck.meta.beta = r.f64();
    if (!r.done()) throw CorruptionError("checkpoint has trailing bytes");
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Network& net, const CheckpointMeta& meta) {
    write_file(path, encode_checkpoint(net, ModelKind::Point, meta));
}

void save_checkpoint(const std::filesystem::path& path, const IntervalNetwork& inn, const CheckpointMeta& meta) {
    write_file(path, encode_checkpoint(inn, meta));
}

void save_checkpoint(const std::filesystem::path& path, const ProbOutNetwork& net, const CheckpointMeta& meta) {
    write_file(path, encode_checkpoint(net.network(), ModelKind::ProbOut, meta));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    try {
        return decode_checkpoint(read_file(path));
    } catch (const CorruptionError& e) {
        if (dynamic_cast<const ContainmentError*>(&e)) throw ContainmentError(path.string() + ": " + e.what());
        throw CorruptionError(path.string() + ": " + e.what());
    }
}

std::string encode_dataset(const DeconvDataset& data) {
    Writer w;
    w.bytes(kDatasetMagic, 5);
    w.u32(kFormatVersion);
    w.u64(data.n());
    w.u64(data.m());
    w.f64(data.sigma);
    w.u64(data.seed);
    w.f64(data.gamma);
    w.block(data.x);
    w.block(data.y);
    return w.take();
}

DeconvDataset decode_dataset(const std::string& bytes) {
    if (bytes.size() < 5 || bytes.compare(0, 5, kDatasetMagic) != 0) throw CorruptionError("not a dataset: bad magic");
    Reader r(bytes, "dataset");
    r.bytes(5);
    const auto version = r.u32();
    if (version != kFormatVersion) throw CorruptionError("unsupported dataset version " + std::to_string(version));
    const auto n = r.u64();
    const auto m = r.u64();
    if (n == 0 || m == 0) throw CorruptionError("dataset has zero-sized dimensions");
    DeconvDataset data;
    data.sigma = r.f64();
    data.seed = r.u64();
    data.gamma = r.f64();
    r.need(16 * n * m);
    data.x = Tensor({m, n});
    data.y = Tensor({m, n});
    r.block(data.x);
    r.block(data.y);
    if (!r.done()) throw CorruptionError("dataset has trailing bytes");
    assign_splits(data);
    return data;
}

void save_dataset(const std::filesystem::path& path, const DeconvDataset& data) { write_file(path, encode_dataset(data)); }

DeconvDataset load_dataset(const std::filesystem::path& path) {
    try {
        return decode_dataset(read_file(path));
    } catch (const CorruptionError& e) {
        throw CorruptionError(path.string() + ": " + e.what());
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("error while reading " + path.string());
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("error while writing " + path.string());
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

namespace {

// RFC 4180 quoting: fields with a comma, quote or line break are quoted.
void append_field(std::string& out, const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) {
        out += field;
        return;
    }
    out += '"';
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
}

} // namespace

std::string to_csv(const CsvTable& table) {
    std::string out;
    auto emit = [&out](const CsvRow& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            append_field(out, row[i]);
        }
        out += '\n';
    };
    emit(table.header);
    for (const auto& row : table.rows) emit(row);
    return out;
}

CsvTable parse_csv(const std::string& text) {
    CsvTable table;
    CsvRow row;
    std::string field;
    bool quoted = false, first = true, pending = false;
    auto end_row = [&] {
        row.push_back(std::move(field));
        field.clear();
        if (!(row.size() == 1 && row[0].empty())) {
            if (first) {
                table.header = std::move(row);
                first = false;
            } else {
                table.rows.push_back(std::move(row));
            }
        }
        row.clear();
        pending = false;
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
                field += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
            continue;
        }
        pending = true;
        if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            end_row();
        } else if (c != '\r') {
            field += c;
        }
    }
    if (quoted) throw CorruptionError("csv: unterminated quoted field");
    if (pending) end_row();
    return table;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) { write_file(path, to_csv(table)); }

namespace {

std::string fixed(double v, int digits = 2) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, digits);
    return std::string(buf, res.ptr);
}

std::string tick_label(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 4);
    return std::string(buf, res.ptr);
}

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

} // namespace

std::string render_svg_lineplot(const std::vector<PlotSeries>& series, const PlotSpec& spec) {
    const double left = 60, right = 20, top = 30, bottom = 50;
    const double w = spec.width, h = spec.height;
    const double pw = w - left - right, ph = h - top - bottom;

    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    for (const auto& s : series)
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (xmax == xmin) xmin -= 0.5, xmax += 0.5;
    if (ymax == ymin) ymin -= 0.5, ymax += 0.5;
    auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
    auto sy = [&](double y) { return top + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
        << "\" viewBox=\"0 0 " << spec.width << ' ' << spec.height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!spec.title.empty())
        svg << "<text x=\"" << fixed(w / 2) << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">"
            << escape_xml(spec.title) << "</text>\n";
    // Axes.
    svg << "<line x1=\"" << fixed(left) << "\" y1=\"" << fixed(top + ph) << "\" x2=\"" << fixed(left + pw)
        << "\" y2=\"" << fixed(top + ph) << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << fixed(left) << "\" y1=\"" << fixed(top) << "\" x2=\"" << fixed(left) << "\" y2=\""
        << fixed(top + ph) << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double fx = xmin + (xmax - xmin) * t / 4.0;
        const double fy = ymin + (ymax - ymin) * t / 4.0;
        svg << "<text x=\"" << fixed(sx(fx)) << "\" y=\"" << fixed(top + ph + 16)
            << "\" text-anchor=\"middle\" font-size=\"10\">" << tick_label(fx) << "</text>\n";
        svg << "<text x=\"" << fixed(left - 6) << "\" y=\"" << fixed(sy(fy) + 3)
            << "\" text-anchor=\"end\" font-size=\"10\">" << tick_label(fy) << "</text>\n";
    }
    if (!spec.x_label.empty())
        svg << "<text x=\"" << fixed(left + pw / 2) << "\" y=\"" << fixed(h - 10)
            << "\" text-anchor=\"middle\" font-size=\"12\">" << escape_xml(spec.x_label) << "</text>\n";
    if (!spec.y_label.empty())
        svg << "<text x=\"14\" y=\"" << fixed(top + ph / 2) << "\" text-anchor=\"middle\" font-size=\"12\" "
            << "transform=\"rotate(-90 14 " << fixed(top + ph / 2) << ")\">" << escape_xml(spec.y_label)
            << "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        svg << "<polyline fill=\"none\" stroke=\"" << escape_xml(s.color) << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            svg << fixed(sx(s.x[i])) << ',' << fixed(sy(s.y[i])) << ' ';
        }
        svg << "\"/>\n";
        const double ly = top + 14.0 * static_cast<double>(k) + 6;
        svg << "<line x1=\"" << fixed(left + pw - 110) << "\" y1=\"" << fixed(ly) << "\" x2=\""
            << fixed(left + pw - 90) << "\" y2=\"" << fixed(ly) << "\" stroke=\"" << escape_xml(s.color)
            << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << fixed(left + pw - 85) << "\" y=\"" << fixed(ly + 4) << "\" font-size=\"10\">"
            << escape_xml(s.label) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

void emit_svg_lineplot(const std::filesystem::path& path, const std::vector<PlotSeries>& series,
                       const PlotSpec& spec) {
    write_file(path, render_svg_lineplot(series, spec));
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace inn
