#include "inn/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "inn/error.hpp"
#include "inn/interval.hpp"
#include "inn/io.hpp"

namespace inn {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) out.push_back(trim(item));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const std::string& why) {
    throw ConfigError(key + " = '" + value + "': " + why);
}

double to_double(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto* end = t.data() + t.size();
    auto res = std::from_chars(t.data(), end, v);
    if (t.empty() || res.ec != std::errc() || res.ptr != end) bad(key, text, "expected a number");
    if (!std::isfinite(v)) bad(key, text, "must be finite");
    return v;
}

std::uint64_t to_uint(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    std::uint64_t v = 0;
    const auto* end = t.data() + t.size();
    auto res = std::from_chars(t.data(), end, v);
    if (t.empty() || res.ec != std::errc() || res.ptr != end) bad(key, text, "expected a nonnegative integer");
    return v;
}

std::size_t to_size(const std::string& key, const std::string& text, std::size_t min_value) {
    const auto v = to_uint(key, text);
    if (v < min_value) bad(key, text, "must be at least " + std::to_string(min_value));
    return static_cast<std::size_t>(v);
}

double positive(const std::string& key, const std::string& text) {
    const double v = to_double(key, text);
    if (!(v > 0.0)) bad(key, text, "must be positive");
    return v;
}

double nonnegative(const std::string& key, const std::string& text) {
    const double v = to_double(key, text);
    if (!(v >= 0.0)) bad(key, text, "must be nonnegative");
    return v;
}

std::vector<double> double_list(const std::string& key, const std::string& text, double min_value) {
    std::vector<double> out;
    for (const auto& item : split(text, ',')) {
        const double v = to_double(key, item);
        if (v < min_value) bad(key, text, "entries must be at least " + format_double(min_value));
        out.push_back(v);
    }
    if (out.empty()) bad(key, text, "expected a comma-separated list");
    return out;
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
    return s;
}

std::string join(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

struct Key {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

const std::map<std::string, Key>& key_table() {
    static const std::map<std::string, Key> table = [] {
        std::map<std::string, Key> t;

        t["data.n"] = {[](RunConfig& c, const std::string& v) { c.data.n = to_size("data.n", v, 2); },
                       [](const RunConfig& c) { return std::to_string(c.data.n); }};
        t["data.m"] = {[](RunConfig& c, const std::string& v) { c.data.m = to_size("data.m", v, 10); },
                       [](const RunConfig& c) { return std::to_string(c.data.m); }};
        t["data.sigma"] = {[](RunConfig& c, const std::string& v) { c.data.sigma = nonnegative("data.sigma", v); },
                           [](const RunConfig& c) { return format_double(c.data.sigma); }};
        t["data.gamma"] = {[](RunConfig& c, const std::string& v) { c.data.gamma = nonnegative("data.gamma", v); },
                           [](const RunConfig& c) { return format_double(c.data.gamma); }};
        t["data.jumps"] = {[](RunConfig& c, const std::string& v) {
                               const auto parts = split(v, ',');
                               if (parts.size() != 2) bad("data.jumps", v, "expected 'min,max'");
                               c.data.jumps_min = to_size("data.jumps", parts[0], 1);
                               c.data.jumps_max = to_size("data.jumps", parts[1], 1);
                               if (c.data.jumps_min > c.data.jumps_max) bad("data.jumps", v, "min exceeds max");
                           },
                           [](const RunConfig& c) {
                               return std::to_string(c.data.jumps_min) + "," + std::to_string(c.data.jumps_max);
                           }};
        t["data.values"] = {[](RunConfig& c, const std::string& v) {
                                const auto parts = split(v, ',');
                                if (parts.size() != 2) bad("data.values", v, "expected 'lo,hi'");
                                c.data.value_lo = to_double("data.values", parts[0]);
                                c.data.value_hi = to_double("data.values", parts[1]);
                                if (!(c.data.value_lo < c.data.value_hi)) bad("data.values", v, "lo must be below hi");
                            },
                            [](const RunConfig& c) {
                                return format_double(c.data.value_lo) + "," + format_double(c.data.value_hi);
                            }};
        t["data.noise"] = {[](RunConfig& c, const std::string& v) {
                               const auto s = trim(v);
                               if (s == "inputs") c.data.noise = NoiseMode::InputsOnly;
                               else if (s == "both") c.data.noise = NoiseMode::InputsAndTargets;
                               else bad("data.noise", v, "expected 'inputs' or 'both'");
                           },
                           [](const RunConfig& c) {
                               return std::string(c.data.noise == NoiseMode::InputsOnly ? "inputs" : "both");
                           }};

        t["base.epochs"] = {[](RunConfig& c, const std::string& v) { c.base.epochs = to_size("base.epochs", v, 0); },
                            [](const RunConfig& c) { return std::to_string(c.base.epochs); }};
        t["base.lr"] = {[](RunConfig& c, const std::string& v) { c.base.lr = positive("base.lr", v); },
                        [](const RunConfig& c) { return format_double(c.base.lr); }};
        t["base.batch"] = {[](RunConfig& c, const std::string& v) { c.base.batch = to_size("base.batch", v, 1); },
                           [](const RunConfig& c) { return std::to_string(c.base.batch); }};
        t["base.arch"] = {[](RunConfig& c, const std::string& v) {
                              std::vector<std::size_t> arch;
                              for (const auto& item : split(v, ',')) arch.push_back(to_size("base.arch", item, 1));
                              if (arch.empty()) bad("base.arch", v, "expected channel counts");
                              if (arch.back() != 1) bad("base.arch", v, "the last layer must have 1 channel");
                              c.base.arch = std::move(arch);
                          },
                          [](const RunConfig& c) { return join(c.base.arch); }};
        t["base.kernel"] = {[](RunConfig& c, const std::string& v) {
                                const auto k = to_size("base.kernel", v, 1);
                                if (k % 2 == 0) bad("base.kernel", v, "must be odd");
                                c.base.kernel = k;
                            },
                            [](const RunConfig& c) { return std::to_string(c.base.kernel); }};
        t["base.dropout"] = {[](RunConfig& c, const std::string& v) {
                                 std::vector<DropoutSite> sites;
                                 if (trim(v) != "none")
                                     for (const auto& item : split(v, ',')) {
                                         const auto parts = split(item, ':');
                                         if (parts.size() != 2) bad("base.dropout", v, "expected 'layer:p,...' or 'none'");
                                         DropoutSite s;
                                         s.after_conv = to_size("base.dropout", parts[0], 1);
                                         s.p = to_double("base.dropout", parts[1]);
                                         if (!(s.p >= 0.0 && s.p < 1.0)) bad("base.dropout", v, "p must lie in [0,1)");
                                         sites.push_back(s);
                                     }
                                 c.base.dropout = std::move(sites);
                             },
                             [](const RunConfig& c) {
                                 if (c.base.dropout.empty()) return std::string("none");
                                 std::string s;
                                 for (std::size_t i = 0; i < c.base.dropout.size(); ++i)
                                     s += (i ? "," : "") + std::to_string(c.base.dropout[i].after_conv) + ":" +
                                          format_double(c.base.dropout[i].p);
                                 return s;
                             }};

        t["inn.epochs"] = {[](RunConfig& c, const std::string& v) { c.inn.epochs = to_size("inn.epochs", v, 0); },
                           [](const RunConfig& c) { return std::to_string(c.inn.epochs); }};
        t["inn.lr"] = {[](RunConfig& c, const std::string& v) { c.inn.lr = positive("inn.lr", v); },
                       [](const RunConfig& c) { return format_double(c.inn.lr); }};
        t["inn.beta"] = {[](RunConfig& c, const std::string& v) {
                             if (trim(v) == "auto") c.inn.beta.reset();
                             else c.inn.beta = positive("inn.beta", v);
                         },
                         [](const RunConfig& c) { return c.inn.beta ? format_double(*c.inn.beta) : std::string("auto"); }};
        t["inn.beta_mae_factor"] = {
            [](RunConfig& c, const std::string& v) { c.inn.beta_mae_factor = positive("inn.beta_mae_factor", v); },
            [](const RunConfig& c) { return format_double(c.inn.beta_mae_factor); }};
        t["inn.batch"] = {[](RunConfig& c, const std::string& v) { c.inn.batch = to_size("inn.batch", v, 1); },
                          [](const RunConfig& c) { return std::to_string(c.inn.batch); }};
        t["inn.mask"] = {[](RunConfig& c, const std::string& v) {
                             const auto s = trim(v);
                             if (s.empty()) bad("inn.mask", v, "expected all, none, last:K or a layer list");
                             c.inn.mask = s;
                         },
                         [](const RunConfig& c) { return c.inn.mask; }};
        t["inn.width_ceiling"] = {
            [](RunConfig& c, const std::string& v) { c.inn.width_ceiling = positive("inn.width_ceiling", v); },
            [](const RunConfig& c) { return format_double(c.inn.width_ceiling); }};

        t["mcdrop.T"] = {[](RunConfig& c, const std::string& v) { c.mcdrop.samples = to_size("mcdrop.T", v, 2); },
                         [](const RunConfig& c) { return std::to_string(c.mcdrop.samples); }};

        t["probout.epochs"] = {
            [](RunConfig& c, const std::string& v) { c.probout.epochs = to_size("probout.epochs", v, 0); },
            [](const RunConfig& c) { return std::to_string(c.probout.epochs); }};
        t["probout.lr"] = {[](RunConfig& c, const std::string& v) { c.probout.lr = positive("probout.lr", v); },
                           [](const RunConfig& c) { return format_double(c.probout.lr); }};
        t["probout.batch"] = {
            [](RunConfig& c, const std::string& v) { c.probout.batch = to_size("probout.batch", v, 1); },
            [](const RunConfig& c) { return std::to_string(c.probout.batch); }};

        t["eval.lambda_grid"] = {
            [](RunConfig& c, const std::string& v) { c.eval.lambda_grid = double_list("eval.lambda_grid", v, 0.0); },
            [](const RunConfig& c) { return join(c.eval.lambda_grid); }};
        t["eval.thresholds"] = {
            [](RunConfig& c, const std::string& v) { c.eval.thresholds = double_list("eval.thresholds", v, 1.0); },
            [](const RunConfig& c) { return join(c.eval.thresholds); }};
        t["eval.sigma_grid"] = {
            [](RunConfig& c, const std::string& v) { c.eval.sigma_grid = double_list("eval.sigma_grid", v, 0.0); },
            [](const RunConfig& c) { return join(c.eval.sigma_grid); }};
        t["eval.alpha"] = {[](RunConfig& c, const std::string& v) {
                               const double a = to_double("eval.alpha", v);
                               if (!(a > 0.0 && a <= 1.0)) bad("eval.alpha", v, "must lie in (0,1]");
                               c.eval.alpha = a;
                           },
                           [](const RunConfig& c) { return format_double(c.eval.alpha); }};
        t["eval.seeds"] = {[](RunConfig& c, const std::string& v) { c.eval.seeds = to_size("eval.seeds", v, 1); },
                           [](const RunConfig& c) { return std::to_string(c.eval.seeds); }};
        t["eval.plots"] = {[](RunConfig& c, const std::string& v) { c.eval.plots = to_size("eval.plots", v, 0); },
                           [](const RunConfig& c) { return std::to_string(c.eval.plots); }};

        t["seed"] = {[](RunConfig& c, const std::string& v) { c.seed = to_uint("seed", v); },
                     [](const RunConfig& c) { return std::to_string(c.seed); }};
        return t;
    }();
    return table;
}

} // namespace

Scale parse_scale(const std::string& text) {
    if (text == "paper") return Scale::Paper;
    if (text == "desk") return Scale::Desk;
    throw ConfigError("unknown scale '" + text + "' (expected paper or desk)");
}

const char* scale_name(Scale s) { return s == Scale::Paper ? "paper" : "desk"; }

RunConfig default_config(Scale scale) {
    RunConfig c;
    if (scale == Scale::Desk) {
        c.data.n = 128;
        c.data.m = 500;
        c.base.epochs = 30;
        c.base.batch = 32;
        c.base.arch = {8, 8, 16, 16, 32, 32, 32, 16, 8, 1};
        c.inn.epochs = 30;
        c.inn.lr = 1e-5;
        c.inn.beta.reset();
        c.inn.batch = 32;
        c.probout.epochs = 30;
        c.probout.batch = 32;
        c.mcdrop.samples = 16;
    }
    return c;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    const auto& table = key_table();
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.set(cfg, value);
}

void validate(const RunConfig& c) {
    if (c.data.jumps_max >= c.data.n)
        throw ConfigError("data.jumps: max " + std::to_string(c.data.jumps_max) + " must be below data.n");
    std::set<std::size_t> seen;
    for (const auto& d : c.base.dropout) {
        if (d.after_conv >= c.base.arch.size())
            throw ConfigError("base.dropout: layer " + std::to_string(d.after_conv) +
                              " must precede the final conv layer " + std::to_string(c.base.arch.size()));
        if (!seen.insert(d.after_conv).second)
            throw ConfigError("base.dropout: layer " + std::to_string(d.after_conv) + " listed twice");
    }
    if (c.base.arch.empty() || c.base.arch.back() != 1) throw ConfigError("base.arch must end with 1 channel");
    if (c.base.kernel % 2 == 0) throw ConfigError("base.kernel must be odd");
    LayerMask::parse(c.inn.mask, c.base.arch.size());
    if (c.eval.sigma_grid.empty()) throw ConfigError("eval.sigma_grid must not be empty");
}

ParsedConfig parse_config(const std::string& text, Scale scale) {
    ParsedConfig out{default_config(scale), {}};
    std::map<std::string, std::size_t> first_line;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            set_config_value(out.config, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
        }
        auto [it, fresh] = first_line.emplace(key, lineno);
        if (!fresh)
            out.warnings.push_back("line " + std::to_string(lineno) + ": '" + key + "' repeats line " +
                                   std::to_string(it->second) + "; the last value wins");
    }
    validate(out.config);
    return out;
}

std::string to_text(const RunConfig& cfg) {
    std::string s;
    for (const auto& [key, k] : key_table()) s += key + " = " + k.get(cfg) + "\n";
    return s;
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& [key, k] : key_table()) keys.push_back(key);
    return keys;
}

} // namespace inn
