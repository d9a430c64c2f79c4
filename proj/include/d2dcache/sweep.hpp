#pragma once

// Parameter sweeps, canned figure reproductions and their CSV output.
//
// A run configuration is a flat key = value file with dotted keys. Every key
// has a default (see config_keys()), and any key can be overridden from the
// environment as D2DCACHE_<KEY> with dots replaced by underscores and letters
// upper-cased, e.g. D2DCACHE_PARAMS_SIGMA_A=20.

#include "d2dcache/analytic.hpp"
#include "d2dcache/dist.hpp"
#include "d2dcache/estimate.hpp"
#include "d2dcache/model.hpp"
#include "d2dcache/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace d2d::sweep {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kCsvSchema = "d2dcache-csv/1";
inline constexpr const char* kEnvPrefix = "D2DCACHE_";

enum class Axis { m_a, beta_db, k, l, gamma, m_split };
enum class MethodChoice { analytic_exact, analytic_approx, analytic_fast, monte_carlo };
enum class Metric { coverage, ase, hit_uniform, hit_cluster_centric };

inline const char* to_string(Axis a) {
    switch (a) {
        case Axis::m_a: return "m_a";
        case Axis::beta_db: return "beta_db";
        case Axis::k: return "k";
        case Axis::l: return "l";
        case Axis::gamma: return "gamma";
        case Axis::m_split: return "m_split";
    }
    return "unknown";
}

inline const char* to_string(MethodChoice m) {
    switch (m) {
        case MethodChoice::analytic_exact: return "analytic_exact";
        case MethodChoice::analytic_approx: return "analytic_approx";
        case MethodChoice::analytic_fast: return "analytic_fast";
        case MethodChoice::monte_carlo: return "monte_carlo";
    }
    return "unknown";
}

inline const char* to_string(Metric m) {
    switch (m) {
        case Metric::coverage: return "coverage";
        case Metric::ase: return "ase";
        case Metric::hit_uniform: return "hit_uniform";
        case Metric::hit_cluster_centric: return "hit_cluster_centric";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Configuration

struct ConfigKey {
    const char* key;
    const char* default_value;
    const char* help;
};

inline const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = {
        {"name", "sweep", "label written into the curve column"},
        {"params.lambda_c", "50", "cluster centers per km^2"},
        {"params.sigma_a", "30", "dense-subcluster scattering std, m"},
        {"params.sigma_b", "", "sparse-subcluster scattering std, m (defaults to sigma_a)"},
        {"params.n_t", "40", "potential transmitters per cluster"},
        {"params.n_r", "40", "potential receivers per cluster"},
        {"params.m_a", "5", "mean active transmitters, dense subcluster"},
        {"params.m_b", "0", "mean active transmitters, sparse subcluster"},
        {"params.alpha", "4", "path-loss exponent"},
        {"params.beta_db", "0", "SIR threshold, dB"},
        {"params.p_d", "1", "transmit power"},
        {"case", "baseline", "ktx | lrx | baseline | double"},
        {"case.k", "1", "rank list for ktx, e.g. 1,5,10"},
        {"case.l", "1", "rank list for lrx"},
        {"case.rx_in_dense", "true", "double variance: receiver in the dense subcluster"},
        {"case.tx_in_dense", "true", "double variance: serving device in the dense subcluster"},
        {"sweep.axis", "m_a", "m_a | beta_db | k | l | gamma | m_split"},
        {"sweep.values", "1:10", "list (1,2,4), range (1:10) or stepped range (0:0.5:2)"},
        {"sweep.split_fixed", "m_a", "m_split axis: which mean stays fixed (m_a | m_b)"},
        {"sweep.split_value", "2", "m_split axis: value of the fixed mean"},
        {"metric", "coverage", "coverage | ase | hit_uniform | hit_cluster_centric"},
        {"methods", "analytic_approx", "comma list of analytic_exact, analytic_approx, analytic_fast, monte_carlo"},
        {"zipf.j_total", "40", "library size"},
        {"zipf.gamma", "0", "Zipf exponent"},
        {"sim.trials", "100000", "Monte Carlo trials per row"},
        {"sim.seed", "1", "Monte Carlo seed"},
        {"sim.disk_radius", "0", "parent-field radius, m (0 selects the default)"},
        {"sim.antithetic", "false", "pair each trial with mirrored fading"},
        {"sim.workers", "1", "threads per Monte Carlo row"},
        {"qmc.seed", "1", "seed of the quasi-Monte Carlo shift"},
        {"workers", "1", "rows evaluated concurrently"},
        {"output", "", "CSV path; empty writes to stdout"},
    };
    return keys;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, sep)) out.push_back(trim(item));
    return out;
}

inline std::string env_name(const std::string& key) {
    std::string out = kEnvPrefix;
    for (char c : key) out += (c == '.') ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

/// Flat key/value configuration with defaults for every known key.
class Config {
public:
    Config() {
        for (const auto& k : config_keys()) values_[k.key] = k.default_value;
    }

    static Config parse(std::istream& in) {
        Config cfg;
        std::string line;
        int number = 0;
        while (std::getline(in, line)) {
            ++number;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw ValidationError("line " + std::to_string(number) + ": expected key = value");
            }
            cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
        return cfg;
    }

    static Config from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ValidationError("cannot read config file " + path);
        return parse(in);
    }

    void set(const std::string& key, const std::string& value) {
        if (!values_.count(key)) throw ValidationError("unknown config key '" + key + "'");
        values_[key] = value;
    }

    /// Applies D2DCACHE_* variables from the environment.
    void apply_environment() {
        for (auto& [key, value] : values_) {
            if (const char* v = std::getenv(env_name(key).c_str())) value = v;
        }
    }

    const std::string& get(const std::string& key) const { return values_.at(key); }
    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ValidationError(key + ": expected a number, got '" + v + "'");
    }
}

inline long long parse_int(const std::string& key, const std::string& v) {
    const double x = parse_double(key, v);
    if (x != std::floor(x)) throw ValidationError(key + ": expected an integer, got '" + v + "'");
    return static_cast<long long>(x);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ValidationError(key + ": expected true or false, got '" + v + "'");
}

/// "1,2,4", "1:10" or "0:0.5:2".
inline std::vector<double> parse_values(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& item : split(v, ',')) {
        if (item.empty()) continue;
        const auto parts = split(item, ':');
        if (parts.size() == 1) {
            out.push_back(parse_double(key, parts[0]));
        } else if (parts.size() == 2 || parts.size() == 3) {
            const double lo = parse_double(key, parts[0]);
            const double hi = parse_double(key, parts.back());
            const double step = parts.size() == 3 ? parse_double(key, parts[1]) : 1.0;
            if (!(step > 0.0)) throw ValidationError(key + ": range step must be positive");
            const auto count = static_cast<long long>(std::floor((hi - lo) / step + 1e-9));
            for (long long i = 0; i <= count; ++i) out.push_back(lo + static_cast<double>(i) * step);
        } else {
            throw ValidationError(key + ": malformed range '" + item + "'");
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sweep specification

struct SweepSpec {
    std::string name = "sweep";
    SystemParams base;
    PlacementCase pcase = Baseline{};
    std::vector<int> ranks;  ///< one curve per rank for ktx / lrx
    Axis axis = Axis::m_a;
    std::vector<double> values;
    Metric metric = Metric::coverage;
    std::vector<MethodChoice> methods{MethodChoice::analytic_approx};
    ZipfLibrary zipf;
    bool split_fixes_m_a = true;
    double split_value = 2.0;
    mc::SimConfig sim;
    std::uint64_t qmc_seed = 1;
    unsigned workers = 1;
    std::string output;
};

inline std::vector<MethodChoice> parse_methods(const std::string& v) {
    std::vector<MethodChoice> out;
    for (const auto& m : split(v, ',')) {
        if (m == "analytic_exact") out.push_back(MethodChoice::analytic_exact);
        else if (m == "analytic_approx") out.push_back(MethodChoice::analytic_approx);
        else if (m == "analytic_fast") out.push_back(MethodChoice::analytic_fast);
        else if (m == "monte_carlo") out.push_back(MethodChoice::monte_carlo);
        else if (!m.empty()) throw ValidationError("methods: unknown method '" + m + "'");
    }
    return out;
}

/// Builds a spec from a configuration and checks it. Throws ValidationError.
inline SweepSpec spec_from_config(const Config& c) {
    SweepSpec s;
    s.name = c.get("name");
    auto num = [&](const char* k) { return parse_double(k, c.get(k)); };
    auto integer = [&](const char* k) { return parse_int(k, c.get(k)); };

    s.base.lambda_c = per_km2(num("params.lambda_c"));
    s.base.sigma_a = num("params.sigma_a");
    s.base.sigma_b = c.get("params.sigma_b").empty() ? s.base.sigma_a : num("params.sigma_b");
    s.base.n_t = static_cast<int>(integer("params.n_t"));
    s.base.n_r = static_cast<int>(integer("params.n_r"));
    s.base.m_a = num("params.m_a");
    s.base.m_b = num("params.m_b");
    s.base.alpha = num("params.alpha");
    s.base.beta = db_to_linear(num("params.beta_db"));
    s.base.p_d = num("params.p_d");

    const std::string& kind = c.get("case");
    auto ranks = [&](const char* k) {
        std::vector<int> out;
        for (double v : parse_values(k, c.get(k))) {
            if (v != std::floor(v)) throw ValidationError(std::string(k) + ": ranks must be integers");
            out.push_back(static_cast<int>(v));
        }
        if (out.empty()) throw ValidationError(std::string(k) + ": empty rank list");
        return out;
    };
    if (kind == "ktx") {
        s.ranks = ranks("case.k");
        s.pcase = KTx{s.ranks.front()};
    } else if (kind == "lrx") {
        s.ranks = ranks("case.l");
        s.pcase = LRx{s.ranks.front()};
    } else if (kind == "baseline") {
        s.pcase = Baseline{};
    } else if (kind == "double") {
        s.pcase = DoubleVariance{parse_bool("case.rx_in_dense", c.get("case.rx_in_dense")),
                                 parse_bool("case.tx_in_dense", c.get("case.tx_in_dense"))};
    } else {
        throw ValidationError("case: expected ktx, lrx, baseline or double, got '" + kind + "'");
    }

    const std::string& axis = c.get("sweep.axis");
    if (axis == "m_a") s.axis = Axis::m_a;
    else if (axis == "beta_db") s.axis = Axis::beta_db;
    else if (axis == "k") s.axis = Axis::k;
    else if (axis == "l") s.axis = Axis::l;
    else if (axis == "gamma") s.axis = Axis::gamma;
    else if (axis == "m_split") s.axis = Axis::m_split;
    else throw ValidationError("sweep.axis: unknown axis '" + axis + "'");
    s.values = parse_values("sweep.values", c.get("sweep.values"));
    const std::string& fixed = c.get("sweep.split_fixed");
    if (fixed != "m_a" && fixed != "m_b") throw ValidationError("sweep.split_fixed: expected m_a or m_b");
    s.split_fixes_m_a = fixed == "m_a";
    s.split_value = num("sweep.split_value");

    const std::string& metric = c.get("metric");
    if (metric == "coverage") s.metric = Metric::coverage;
    else if (metric == "ase") s.metric = Metric::ase;
    else if (metric == "hit_uniform") s.metric = Metric::hit_uniform;
    else if (metric == "hit_cluster_centric") s.metric = Metric::hit_cluster_centric;
    else throw ValidationError("metric: unknown metric '" + metric + "'");

    s.methods = parse_methods(c.get("methods"));
    s.zipf.j_total = static_cast<int>(integer("zipf.j_total"));
    s.zipf.gamma = num("zipf.gamma");

    const long long trials = integer("sim.trials");
    if (trials < 1) throw ValidationError("sim.trials must be at least 1");
    s.sim.trials = static_cast<std::uint64_t>(trials);
    s.sim.seed = static_cast<std::uint64_t>(integer("sim.seed"));
    s.sim.disk_radius = num("sim.disk_radius");
    if (s.sim.disk_radius < 0.0) throw ValidationError("sim.disk_radius must be positive (or 0 for the default)");
    s.sim.antithetic = parse_bool("sim.antithetic", c.get("sim.antithetic"));
    s.sim.workers = static_cast<unsigned>(std::max(1LL, integer("sim.workers")));
    s.qmc_seed = static_cast<std::uint64_t>(integer("qmc.seed"));
    s.workers = static_cast<unsigned>(std::max(1LL, integer("workers")));
    s.output = c.get("output");
    return s;
}

/// Rank curves of the spec; a single entry for rank-free cases.
inline std::vector<PlacementCase> curves(const SweepSpec& s) {
    std::vector<PlacementCase> out;
    if (std::holds_alternative<KTx>(s.pcase) && s.axis != Axis::k) {
        for (int k : s.ranks) out.push_back(KTx{k});
    } else if (std::holds_alternative<LRx>(s.pcase) && s.axis != Axis::l) {
        for (int l : s.ranks) out.push_back(LRx{l});
    }
    if (out.empty()) out.push_back(s.pcase);
    return out;
}

/// Parameters and case at one axis value.
inline std::pair<SystemParams, PlacementCase> at_axis(const SweepSpec& s, const PlacementCase& curve, double v,
                                                      ZipfLibrary& lib) {
    SystemParams p = s.base;
    PlacementCase c = curve;
    lib = s.zipf;
    switch (s.axis) {
        case Axis::m_a: p.m_a = v; break;
        case Axis::beta_db: p.beta = db_to_linear(v); break;
        case Axis::k: c = KTx{static_cast<int>(v)}; break;
        case Axis::l: c = LRx{static_cast<int>(v)}; break;
        case Axis::gamma: lib.gamma = v; break;
        case Axis::m_split:
            if (s.split_fixes_m_a) {
                p.m_a = s.split_value;
                p.m_b = v - s.split_value;
            } else {
                p.m_b = s.split_value;
                p.m_a = v - s.split_value;
            }
            break;
    }
    return {p, c};
}

/// Throws ValidationError if the spec cannot produce any row.
inline void check(const SweepSpec& s) {
    if (s.values.empty()) throw ValidationError("sweep.values is empty");
    if (s.methods.empty()) throw ValidationError("at least one method must be selected");
    for (std::size_t i = 1; i < s.values.size(); ++i) {
        if (!(s.values[i] > s.values[i - 1])) throw ValidationError("sweep.values must be strictly increasing");
    }
    if ((s.axis == Axis::k && !std::holds_alternative<KTx>(s.pcase)) ||
        (s.axis == Axis::l && !std::holds_alternative<LRx>(s.pcase))) {
        throw ValidationError(std::string("axis ") + to_string(s.axis) + " does not match case " + to_string(s.pcase));
    }
    if (s.axis == Axis::m_split && !std::holds_alternative<DoubleVariance>(s.pcase)) {
        throw ValidationError("axis m_split requires the double case");
    }
    if (s.axis == Axis::gamma && s.metric != Metric::hit_uniform && s.metric != Metric::hit_cluster_centric) {
        throw ValidationError("axis gamma requires a hit-probability metric");
    }
    if (s.metric == Metric::hit_uniform || s.metric == Metric::hit_cluster_centric) {
        validate(s.zipf, s.base.n_t);
    }
    // the base point must be valid whenever the axis does not override what is wrong with it
    for (const auto& curve : curves(s)) {
        ZipfLibrary lib;
        auto [p, c] = at_axis(s, curve, s.values.front(), lib);
        validate(p, c);
    }
}

// ---------------------------------------------------------------------------
// Evaluation

struct Row {
    std::string curve;
    std::string case_name;
    std::string axis;
    double axis_value = 0.0;
    std::string method;
    std::string metric;
    std::optional<double> value;
    std::optional<double> std_error;
    std::string status = "ok";  ///< ok | invalid | nonconvergence | error
    std::string message;
    std::uint64_t seed = 0;
    Meta meta;
    double wall_seconds = 0.0;
};

struct Table {
    std::vector<Row> rows;

    const Row* find(const std::string& curve, double axis_value, const std::string& method) const {
        for (const auto& r : rows) {
            if (r.curve == curve && r.axis_value == axis_value && r.method == method) return &r;
        }
        return nullptr;
    }
};

/// Engines shared by rows with identical parameters. Each engine is used by
/// one row at a time.
class EngineCache {
public:
    struct Entry {
        std::mutex lock;
        std::unique_ptr<analytic::CoverageEngine> engine;
    };

    std::shared_ptr<Entry> get(const SystemParams& p, const analytic::EngineSettings& set) {
        std::lock_guard<std::mutex> g(lock_);
        std::ostringstream key;
        key.precision(17);
        key << p.lambda_c << '/' << p.sigma_a << '/' << p.sigma_b << '/' << p.n_t << '/' << p.n_r << '/' << p.m_a
            << '/' << p.m_b << '/' << p.alpha << '/' << p.beta << '/' << p.p_d;
        auto& slot = entries_[key.str()];
        if (!slot) {
            slot = std::make_shared<Entry>();
            slot->engine = std::make_unique<analytic::CoverageEngine>(p, set);
        }
        return slot;
    }

private:
    std::mutex lock_;
    std::map<std::string, std::shared_ptr<Entry>> entries_;
};

inline std::string curve_label(const SweepSpec& s, const PlacementCase& c) {
    std::string label = s.name;
    if (s.metric == Metric::hit_uniform || s.metric == Metric::hit_cluster_centric) {
        std::ostringstream os;
        os << label << ":" << to_string(s.metric);
        if (s.axis != Axis::gamma) os << "(gamma=" << s.zipf.gamma << ")";
        return os.str();
    }
    return label + ":" + to_string(c);
}

namespace detail {

struct Value {
    double value;
    std::optional<double> std_error;
    Method method;
    Meta meta;
};

inline std::optional<Method> analytic_method(MethodChoice m, const PlacementCase& c) {
    const bool ktx = std::holds_alternative<KTx>(c);
    switch (m) {
        case MethodChoice::analytic_exact: return ktx ? Method::thm1_exact : analytic::default_method(c);
        case MethodChoice::analytic_approx: return analytic::default_method(c);
        case MethodChoice::analytic_fast:
            if (ktx) return Method::cor3_fast;
            return std::nullopt;
        case MethodChoice::monte_carlo: return Method::monte_carlo;
    }
    return std::nullopt;
}

/// Coverage for the row's case and method.
inline Value coverage(const PlacementCase& c, const SystemParams& p, MethodChoice m, const SweepSpec& s,
                      EngineCache& cache) {
    if (m == MethodChoice::monte_carlo) {
        auto e = mc::simulate_coverage(c, p, s.sim);
        return {e.value, e.std_error, e.method, e.meta};
    }
    const auto method = analytic_method(m, c);
    analytic::EngineSettings set;
    set.qmc_seed = s.qmc_seed;
    auto entry = cache.get(p, set);
    std::lock_guard<std::mutex> g(entry->lock);
    auto e = entry->engine->coverage(c, method);
    return {e.value, e.std_error, e.method, e.meta};
}

inline Value evaluate(const SweepSpec& s, const PlacementCase& c, const SystemParams& p, const ZipfLibrary& lib,
                      MethodChoice m, EngineCache& cache) {
    switch (s.metric) {
        case Metric::coverage: return coverage(c, p, m, s, cache);
        case Metric::ase: {
            auto v = coverage(c, p, m, s, cache);
            const double per_unit_coverage = (p.m_a + p.m_b) * p.lambda_c * std::log2(1.0 + p.beta);
            v.value = analytic::ase(CoverageEstimate(v.value, v.method, v.std_error), p);
            if (v.std_error) v.std_error = *v.std_error * per_unit_coverage;
            return v;
        }
        case Metric::hit_uniform: {
            validate(lib, p.n_t);
            auto v = coverage(Baseline{}, p, m, s, cache);
            const double head = dist::zipf_head_mass(p.n_t, lib);
            v.value *= head;
            if (v.std_error) v.std_error = *v.std_error * head;
            return v;
        }
        case Metric::hit_cluster_centric: {
            validate(lib, p.n_t);
            Value total{0.0, std::nullopt, Method::cor2_approx, {}};
            double var = 0.0;
            for (int j = p.n_t; j >= 1; --j) {
                const double w = dist::zipf_pmf(j, lib);
                auto v = coverage(KTx{j}, p, m, s, cache);
                total.value += w * v.value;
                total.method = v.method;
                if (v.std_error) var += w * w * *v.std_error * *v.std_error;
                if (j == 1) total.meta = v.meta;
            }
            if (m == MethodChoice::monte_carlo) total.std_error = std::sqrt(var);
            return total;
        }
    }
    throw ValidationError("unknown metric");
}

}  // namespace detail

struct RunOptions {
    unsigned workers = 1;
    bool quiet = true;
};

/// Evaluates every (curve, axis value, method) row. Rows run concurrently on
/// up to opt.workers threads and are returned in (curve, axis, method) order.
/// Evaluation errors are recorded on their row.
inline Table run_sweep(const SweepSpec& s, const RunOptions& opt = {}, EngineCache* shared_cache = nullptr) {
    check(s);
    struct Task {
        PlacementCase curve;
        double value;
        MethodChoice method;
    };
    std::vector<Task> tasks;
    for (const auto& curve : curves(s)) {
        for (double v : s.values) {
            for (auto m : s.methods) {
                ZipfLibrary lib;
                auto [p, c] = at_axis(s, curve, v, lib);
                const bool hit = s.metric == Metric::hit_uniform || s.metric == Metric::hit_cluster_centric;
                // Corollary 3 has no counterpart outside the k-Tx case
                if (m == MethodChoice::analytic_fast && !hit && !std::holds_alternative<KTx>(c)) continue;
                if (m == MethodChoice::analytic_fast && s.metric == Metric::hit_uniform) continue;
                tasks.push_back({curve, v, m});
            }
        }
    }

    EngineCache local;
    EngineCache& cache = shared_cache ? *shared_cache : local;
    Table table;
    table.rows.resize(tasks.size());
    std::atomic<std::size_t> next{0};
    std::mutex print_lock;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            const auto& t = tasks[i];
            Row& row = table.rows[i];
            ZipfLibrary lib;
            auto [p, c] = at_axis(s, t.curve, t.value, lib);
            row.curve = curve_label(s, t.curve);
            row.case_name = to_string(c);
            row.axis = to_string(s.axis);
            row.axis_value = t.value;
            row.method = to_string(t.method);
            row.metric = to_string(s.metric);
            row.seed = t.method == MethodChoice::monte_carlo ? s.sim.seed : s.qmc_seed;
            const auto start = std::chrono::steady_clock::now();
            try {
                validate(p, c);
                auto v = detail::evaluate(s, c, p, lib, t.method, cache);
                row.value = v.value;
                row.std_error = v.std_error;
                row.method = std::string(to_string(t.method)) + "/" + to_string(v.method);
                row.meta = std::move(v.meta);
            } catch (const ValidationError& e) {
                row.status = "invalid";
                row.message = e.what();
            } catch (const NonConvergenceError& e) {
                row.status = "nonconvergence";
                row.message = e.what();
            } catch (const std::exception& e) {
                row.status = "error";
                row.message = e.what();
            }
            row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            if (!opt.quiet) {
                std::lock_guard<std::mutex> g(print_lock);
                std::fprintf(stderr, "%s %s=%g %s: %s (%.2fs)\n", row.curve.c_str(), row.axis.c_str(), row.axis_value,
                             row.method.c_str(), row.value ? meta_value(*row.value).c_str() : row.status.c_str(),
                             row.wall_seconds);
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(opt.workers, static_cast<unsigned>(tasks.size())));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return table;
}

// ---------------------------------------------------------------------------
// Output

inline std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string settings_field(const Meta& meta) {
    std::string out;
    for (const auto& [k, v] : meta) {
        if (!out.empty()) out += ';';
        out += k + "=" + v;
    }
    return out;
}

/// CSV body; wall times go to the metadata file so reruns compare byte for byte.
inline std::string to_csv(const Table& t) {
    std::ostringstream os;
    os << "version,curve,case,axis,axis_value,method,metric,value,std_error,status,seed,settings,message\n";
    for (const auto& r : t.rows) {
        os << kVersion << ',' << csv_field(r.curve) << ',' << csv_field(r.case_name) << ',' << r.axis << ','
           << format_number(r.axis_value) << ',' << csv_field(r.method) << ',' << r.metric << ','
           << (r.value ? format_number(*r.value) : "") << ',' << (r.std_error ? format_number(*r.std_error) : "")
           << ',' << r.status << ',' << r.seed << ',' << csv_field(settings_field(r.meta)) << ','
           << csv_field(r.message) << '\n';
    }
    return os.str();
}

inline std::string to_metadata(const Table& t, const Meta& run_meta) {
    std::ostringstream os;
    os << "version = " << kVersion << "\n";
    os << "csv_schema = " << kCsvSchema << "\n";
    os << "rng = " << mc::kRngName << "\n";
    for (const auto& [k, v] : run_meta) os << k << " = " << v << "\n";
    double total = 0.0;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        os << "row." << i << ".wall_seconds = " << format_number(t.rows[i].wall_seconds) << "\n";
        total += t.rows[i].wall_seconds;
    }
    os << "total_row_seconds = " << format_number(total) << "\n";
    return os.str();
}

/// Writes through a temporary file and a rename so readers never see a partial file.
inline void write_atomic(const std::string& path, const std::string& content) {
    const std::filesystem::path target(path);
    const std::filesystem::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, target);
}

inline std::string metadata_path(const std::string& csv_path) { return csv_path + ".meta"; }

inline Meta spec_meta(const SweepSpec& s) {
    return {{"name", s.name},
            {"params", describe(s.base)},
            {"case", to_string(s.pcase)},
            {"axis", to_string(s.axis)},
            {"metric", to_string(s.metric)},
            {"sim.trials", meta_value(s.sim.trials)},
            {"sim.seed", meta_value(s.sim.seed)},
            {"sim.antithetic", s.sim.antithetic ? "true" : "false"},
            {"qmc.seed", meta_value(s.qmc_seed)}};
}

// ---------------------------------------------------------------------------
// Figures

struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct FigureResult {
    std::string name;
    std::vector<SweepSpec> specs;
    Table table;
    std::vector<Check> checks;

    bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
    }
};

/// Overrides applied on top of a canned figure.
struct FigureOptions {
    std::optional<std::uint64_t> trials;
    std::optional<std::uint64_t> seed;
    std::optional<std::vector<MethodChoice>> methods;
    unsigned workers = 1;
    bool quiet = true;
};

inline const std::vector<std::string>& figure_names() {
    static const std::vector<std::string> names = {"fig3", "fig4", "fig5", "fig6", "fig7", "fig9", "fig10"};
    return names;
}

namespace detail {

inline SweepSpec figure_base(const std::string& name) {
    SweepSpec s;
    s.name = name;
    s.base = SystemParams{};
    s.base.lambda_c = per_km2(50.0);
    s.base.sigma_a = s.base.sigma_b = 30.0;
    s.base.beta = db_to_linear(0.0);
    s.base.alpha = 4.0;
    s.axis = Axis::m_a;
    s.values = parse_values("values", "1:10");
    return s;
}

inline std::vector<SweepSpec> figure_specs(const std::string& name) {
    using MC = MethodChoice;
    std::vector<SweepSpec> out;
    if (name == "fig3") {
        // baseline, l-Rx and k-Tx against simulation, N_t = N_r = 40
        auto s = figure_base(name);
        s.base.n_t = s.base.n_r = 40;
        s.methods = {MC::analytic_approx, MC::monte_carlo};
        s.pcase = Baseline{};
        out.push_back(s);
        s.pcase = LRx{1};
        s.ranks = {1, 10};
        out.push_back(s);
        s.pcase = KTx{1};
        s.ranks = {1, 10};
        out.push_back(s);
    } else if (name == "fig4" || name == "fig5") {
        auto s = figure_base(name);
        s.base.n_t = 30;
        s.base.n_r = 30;
        s.metric = name == "fig5" ? Metric::ase : Metric::coverage;
        if (name == "fig5") s.values = parse_values("values", "1:15");
        s.pcase = KTx{1};
        s.ranks = {1, 5, 10, 20};
        out.push_back(s);
        s.pcase = Baseline{};
        s.ranks.clear();
        out.push_back(s);
    } else if (name == "fig6" || name == "fig7") {
        auto s = figure_base(name);
        s.base.n_t = 30;
        s.base.n_r = 30;
        s.metric = name == "fig7" ? Metric::ase : Metric::coverage;
        if (name == "fig7") s.values = parse_values("values", "1:15");
        s.pcase = LRx{1};
        s.ranks = {1, 5, 10, 20};
        out.push_back(s);
        s.pcase = Baseline{};
        s.ranks.clear();
        out.push_back(s);
    } else if (name == "fig9") {
        auto s = figure_base(name);
        s.base.n_t = 30;
        s.base.n_r = 30;
        s.zipf.j_total = 40;
        for (double gamma : {0.0, 0.5, 1.0}) {
            s.zipf.gamma = gamma;
            s.metric = Metric::hit_uniform;
            out.push_back(s);
            s.metric = Metric::hit_cluster_centric;
            out.push_back(s);
        }
    } else if (name == "fig10") {
        // splits of the total m_a + m_b: all in the dense subcluster, m_a held
        // at 2, and all in the sparse subcluster (simulation only)
        auto s = figure_base(name);
        s.base.sigma_a = 10.0;
        s.base.sigma_b = 30.0;
        s.axis = Axis::m_split;
        s.methods = {MC::analytic_approx, MC::monte_carlo};
        s.split_fixes_m_a = false;
        s.split_value = 0.0;
        for (bool rx_dense : {true, false}) {
            s.name = std::string(name) + (rx_dense ? ":m_b=0" : ":m_b=0,rx_sparse");
            s.pcase = DoubleVariance{rx_dense, true};
            out.push_back(s);
        }
        s.split_fixes_m_a = true;
        s.split_value = 2.0;
        s.values = parse_values("values", "2:10");
        for (bool rx_dense : {true, false}) {
            s.name = std::string(name) + (rx_dense ? ":m_a=2" : ":m_a=2,rx_sparse");
            s.pcase = DoubleVariance{rx_dense, true};
            out.push_back(s);
        }
        s.name = std::string(name) + ":m_a=0";
        s.split_value = 0.0;
        s.values = parse_values("values", "1:10");
        s.pcase = DoubleVariance{false, false};
        s.methods = {MC::monte_carlo};
        out.push_back(s);
    } else {
        throw ValidationError("unknown figure '" + name + "'");
    }
    return out;
}

/// Values of one curve for one method family, keyed by axis value.
inline std::map<double, double> series(const Table& t, const std::string& curve, const std::string& method_prefix) {
    std::map<double, double> out;
    for (const auto& r : t.rows) {
        if (r.curve == curve && r.method.rfind(method_prefix, 0) == 0 && r.value) out[r.axis_value] = *r.value;
    }
    return out;
}

inline void pointwise_geq(FigureResult& f, const std::string& name, const std::map<double, double>& hi,
                          const std::map<double, double>& lo, double margin = 0.0) {
    Check c{name, !hi.empty(), ""};
    for (const auto& [x, v] : lo) {
        auto it = hi.find(x);
        if (it == hi.end()) continue;
        if (!(it->second + 1e-12 >= v + margin)) {
            c.passed = false;
            c.detail += "x=" + format_number(x) + ": " + format_number(it->second) + " < " + format_number(v) + "; ";
        }
    }
    if (c.passed && c.detail.empty()) c.detail = "holds at every axis value";
    f.checks.push_back(c);
}

inline std::pair<double, double> argmax(const std::map<double, double>& s) {
    std::pair<double, double> best{0.0, -1.0};
    for (const auto& [x, v] : s) {
        if (v > best.second) best = {x, v};
    }
    return best;
}

inline void analytic_vs_mc(FigureResult& f) {
    Check c{"analytic within 3 SE + 0.01 of simulation", true, ""};
    int compared = 0;
    for (const auto& r : f.table.rows) {
        if (r.method.rfind("monte_carlo", 0) != 0 || !r.value || !r.std_error) continue;
        for (const auto& a : f.table.rows) {
            if (a.curve != r.curve || a.axis_value != r.axis_value || a.method.rfind("analytic", 0) != 0 || !a.value) {
                continue;
            }
            if (a.method.find("cor3_fast") != std::string::npos) continue;
            ++compared;
            const double gap = std::abs(*a.value - *r.value);
            if (gap > 3.0 * *r.std_error + 0.01) {
                c.passed = false;
                c.detail += a.curve + " x=" + format_number(a.axis_value) + " gap " + format_number(gap) + "; ";
            }
        }
    }
    if (c.passed) c.detail = std::to_string(compared) + " rows compared";
    f.checks.push_back(c);
}

inline void row_errors(FigureResult& f) {
    Check c{"every row evaluated", true, ""};
    for (const auto& r : f.table.rows) {
        if (r.status != "ok") {
            c.passed = false;
            c.detail += r.curve + " x=" + format_number(r.axis_value) + ": " + r.message + "; ";
        }
    }
    f.checks.push_back(c);
}

inline void figure_checks(FigureResult& f) {
    const auto& n = f.name;
    const std::string a = "analytic";
    row_errors(f);
    if (n == "fig3") {
        analytic_vs_mc(f);
        pointwise_geq(f, "k-Tx (k=1) above baseline", series(f.table, "fig3:ktx(k=1)", a),
                      series(f.table, "fig3:baseline", a));
        pointwise_geq(f, "l-Rx (l=1) above baseline", series(f.table, "fig3:lrx(l=1)", a),
                      series(f.table, "fig3:baseline", a));
    } else if (n == "fig4" || n == "fig6") {
        const char* kind = n == "fig4" ? "ktx(k=" : "lrx(l=";
        const int ranks[] = {1, 5, 10, 20};
        for (int i = 0; i + 1 < 4; ++i) {
            const std::string hi = n + ":" + kind + std::to_string(ranks[i]) + ")";
            const std::string lo = n + ":" + kind + std::to_string(ranks[i + 1]) + ")";
            pointwise_geq(f, "curve " + hi + " >= curve " + lo, series(f.table, hi, a), series(f.table, lo, a));
        }
    } else if (n == "fig5" || n == "fig7") {
        const char* kind = n == "fig5" ? "ktx(k=" : "lrx(l=";
        auto best = [&](int rank) { return argmax(series(f.table, n + ":" + kind + std::to_string(rank) + ")", a)); };
        const auto b1 = best(1), b10 = best(10), b20 = best(20);
        const auto base = argmax(series(f.table, n + ":baseline", a));
        f.checks.push_back({"argmax m_a ordered rank 1 >= 10 >= 20", b1.first >= b10.first && b10.first >= b20.first,
                            format_number(b1.first) + " >= " + format_number(b10.first) + " >= " +
                                format_number(b20.first)});
        if (n == "fig5") {
            f.checks.push_back({"peak ASE ordered k=1 > baseline > k=20",
                                b1.second > base.second && base.second > b20.second,
                                format_number(b1.second) + " > " + format_number(base.second) + " > " +
                                    format_number(b20.second)});
        } else {
            f.checks.push_back({"peak ASE ordered l=1 >= l=20", b1.second >= b20.second,
                                format_number(b1.second) + " >= " + format_number(b20.second)});
        }
    } else if (n == "fig9") {
        auto uni = [&](const char* g) { return series(f.table, "fig9:hit_uniform(gamma=" + std::string(g) + ")", a); };
        auto cc = [&](const char* g) {
            return series(f.table, "fig9:hit_cluster_centric(gamma=" + std::string(g) + ")", a);
        };
        pointwise_geq(f, "cluster-centric above uniform at gamma=0.5", cc("0.5"), uni("0.5"), 1e-12);
        pointwise_geq(f, "cluster-centric above uniform at gamma=1", cc("1"), uni("1"), 1e-12);
        Check same{"cluster-centric equals uniform at gamma=0 (2e-3)", true, ""};
        const auto u0 = uni("0"), c0 = cc("0");
        for (const auto& [x, v] : u0) {
            if (c0.count(x) && std::abs(c0.at(x) - v) > 2e-3) {
                same.passed = false;
                same.detail += "x=" + format_number(x) + "; ";
            }
        }
        f.checks.push_back(same);
        pointwise_geq(f, "cluster-centric nondecreasing in gamma (0.5 vs 0)", cc("0.5"), cc("0"));
        pointwise_geq(f, "cluster-centric nondecreasing in gamma (1 vs 0.5)", cc("1"), cc("0.5"));
    } else if (n == "fig10") {
        analytic_vs_mc(f);
        pointwise_geq(f, "m_a=2 split above m_b=0 split", series(f.table, "fig10:m_a=2:double(rx=dense,tx=dense)", a),
                      series(f.table, "fig10:m_b=0:double(rx=dense,tx=dense)", a));
        pointwise_geq(f, "receiver in dense subcluster above sparse (m_b=0)",
                      series(f.table, "fig10:m_b=0:double(rx=dense,tx=dense)", a),
                      series(f.table, "fig10:m_b=0,rx_sparse:double(rx=sparse,tx=dense)", a));
        pointwise_geq(f, "receiver in dense subcluster above sparse (m_a=2)",
                      series(f.table, "fig10:m_a=2:double(rx=dense,tx=dense)", a),
                      series(f.table, "fig10:m_a=2,rx_sparse:double(rx=sparse,tx=dense)", a));
        pointwise_geq(f, "serving device in dense subcluster above m_a=0",
                      series(f.table, "fig10:m_b=0,rx_sparse:double(rx=sparse,tx=dense)", a),
                      series(f.table, "fig10:m_a=0:double(rx=sparse,tx=sparse)", "monte_carlo"));
    }
}

}  // namespace detail

/// Runs the canned specification of a figure and its qualitative checks.
inline FigureResult reproduce_figure(const std::string& name, const FigureOptions& opt = {}) {
    FigureResult f;
    f.name = name;
    f.specs = detail::figure_specs(name);
    EngineCache cache;
    for (auto& s : f.specs) {
        if (opt.trials) s.sim.trials = *opt.trials;
        if (opt.seed) s.sim.seed = *opt.seed;
        if (opt.methods) {
            // the all-sparse curve of fig10 has no analytic counterpart
            std::vector<MethodChoice> keep;
            for (auto m : *opt.methods) {
                const auto* dv = std::get_if<DoubleVariance>(&s.pcase);
                if (dv && !dv->tx_in_dense && m != MethodChoice::monte_carlo) continue;
                keep.push_back(m);
            }
            if (keep.empty()) continue;
            s.methods = keep;
        }
        auto part = run_sweep(s, {opt.workers, opt.quiet}, &cache);
        for (auto& r : part.rows) f.table.rows.push_back(std::move(r));
    }
    detail::figure_checks(f);
    return f;
}

inline std::string checks_report(const FigureResult& f) {
    std::ostringstream os;
    for (const auto& c : f.checks) {
        os << (c.passed ? "PASS" : "FAIL") << "  " << f.name << ": " << c.name;
        if (!c.detail.empty()) os << " (" << c.detail << ")";
        os << "\n";
    }
    return os.str();
}

}  // namespace d2d::sweep
