#include "tissue/config.hpp"

#include <boost/algorithm/string/trim.hpp>
#include <boost/crc.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "tissue/errors.hpp"

namespace tissue {

namespace {

struct Field {
    const char* key;
    std::function<void(RunConfig&, const std::string&)> parse;  // throws std::invalid_argument
    std::function<std::string(const RunConfig&)> render;
};

double to_double(const std::string& v) {
    double x = 0.0;
    const auto* end = v.data() + v.size();
    const auto r = std::from_chars(v.data(), end, x);
    if (r.ec != std::errc() || r.ptr != end) throw std::invalid_argument("expected a number");
    return x;
}

long long to_integer(const std::string& v) {
    long long x = 0;
    const auto* end = v.data() + v.size();
    const auto r = std::from_chars(v.data(), end, x);
    if (r.ec != std::errc() || r.ptr != end) throw std::invalid_argument("expected an integer");
    return x;
}

std::vector<double> to_list(const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        boost::algorithm::trim(item);
        out.push_back(to_double(item));
    }
    if (out.empty()) throw std::invalid_argument("expected a comma separated list of numbers");
    return out;
}

std::string num(double x) { return fmt::format("{}", x); }

std::string list(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v[i]);
    return s;
}

[[noreturn]] void invalid(const std::string& field, const std::string& range, const std::string& got) {
    throw ConfigError(kExitValidation,
                      fmt::format("invalid value for '{}': {} (valid: {})", field, got, range));
}

#define REAL(name, member) \
    {name, [](RunConfig& c, const std::string& v) { c.member = to_double(v); }, \
     [](const RunConfig& c) { return num(c.member); }}
#define INT(name, member) \
    {name, [](RunConfig& c, const std::string& v) { c.member = static_cast<decltype(c.member)>(to_integer(v)); }, \
     [](const RunConfig& c) { return std::to_string(c.member); }}
#define TEXT(name, member) \
    {name, [](RunConfig& c, const std::string& v) { c.member = v; }, \
     [](const RunConfig& c) { return c.member; }}
#define LIST(name, member) \
    {name, [](RunConfig& c, const std::string& v) { c.member = to_list(v); }, \
     [](const RunConfig& c) { return list(c.member); }}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        INT("dimension", dimension),
        REAL("inclusion_margin", inclusion_margin),
        INT("cell_resolution", cell_resolution),
        REAL("epsilon", epsilon),
        REAL("sigma.int", sigma_int),
        REAL("sigma.out", sigma_out),
        REAL("alpha", alpha),
        TEXT("f.kind", f_kind),
        REAL("f.kappa", f_kappa),
        REAL("f.delta_shift", f_delta_shift),
        TEXT("psi.spatial", psi_spatial),
        TEXT("psi.temporal", psi_temporal),
        REAL("psi.amplitude", psi_amplitude),
        REAL("psi.offset", psi_offset),
        REAL("time.dt", dt),
        REAL("time.horizon", horizon),
        INT("time.sample_stride", sample_stride),
        TEXT("init.kind", init_kind),
        REAL("init.amplitude", init_amplitude),
        REAL("solver.newton_tol", newton_tol),
        INT("solver.newton_max_iters", newton_max_iters),
        REAL("solver.linear_tol", linear_tol),
        INT("solver.linear_max_iters", linear_max_iters),
        REAL("periodic.tol", periodic_tol),
        INT("periodic.max_iters", periodic_max_iters),
        TEXT("periodic.method", periodic_method),
        LIST("periodic.deltas", periodic_deltas),
        INT("macro.resolution", macro_resolution),
        INT("macro.dimension", macro_dimension),
        LIST("compare.epsilons", compare_epsilons),
        {"seed",
         [](RunConfig& c, const std::string& v) {
             const long long s = to_integer(v);
             if (s < 0) invalid("seed", "a non-negative integer", v);
             c.seed = static_cast<std::uint64_t>(s);
         },
         [](const RunConfig& c) { return std::to_string(c.seed); }},
        TEXT("output", output),
    };
    return table;
}

#undef REAL
#undef INT
#undef TEXT
#undef LIST

bool integer_reciprocal(double x) {
    if (!(x > 0.0) || x > 1.0) return false;
    const double r = 1.0 / x;
    return std::abs(r - std::round(r)) <= 1e-9 * r;
}

}  // namespace

CellGeometry RunConfig::cell() const {
    return build_cell_geometry(inclusion_margin, cell_resolution, dimension);
}

EpsilonDomain RunConfig::domain(double eps) const { return tile_domain(cell(), eps); }

Nonlinearity RunConfig::nonlinearity() const { return make_nonlinearity(f_kind, f_kappa); }

BoundaryData RunConfig::boundary() const {
    BoundaryData b;
    b.spatial = parse_spatial_profile(psi_spatial);
    b.temporal = parse_temporal_profile(psi_temporal);
    b.amplitude = psi_amplitude;
    b.offset = psi_offset;
    return b;
}

InitialJump RunConfig::initial_jump() const {
    return {parse_initial_kind(init_kind), init_amplitude, seed};
}

SolverParams RunConfig::solver() const {
    SolverParams p;
    p.alpha = alpha;
    p.dt = dt;
    p.newton_tol = newton_tol;
    p.newton_max_iters = newton_max_iters;
    p.linear_tol = linear_tol;
    p.linear_max_iters = linear_max_iters;
    p.delta_shift = f_delta_shift;
    return p;
}

PicardOptions RunConfig::picard() const {
    PicardOptions o;
    o.tol = periodic_tol;
    o.max_iters = periodic_max_iters;
    return o;
}

int RunConfig::total_steps() const { return static_cast<int>(std::lround(horizon / dt)); }

void validate(const RunConfig& c) {
    if (c.dimension != 1 && c.dimension != 2) invalid("dimension", "1 or 2", std::to_string(c.dimension));
    if (!(c.inclusion_margin > 0.0 && c.inclusion_margin < 0.5)) {
        invalid("inclusion_margin", "(0, 0.5)", num(c.inclusion_margin));
    }
    if (c.cell_resolution < 4 || c.cell_resolution > 256) {
        invalid("cell_resolution", "integer in [4, 256]", std::to_string(c.cell_resolution));
    }
    try {
        (void)c.cell();
    } catch (const GeometryError& e) {
        invalid("inclusion_margin", "margin * cell_resolution must be a positive integer", e.what());
    }
    if (!integer_reciprocal(c.epsilon)) invalid("epsilon", "(0, 1] with 1/epsilon an integer", num(c.epsilon));
    if (!(c.sigma_int > 0.0) || !std::isfinite(c.sigma_int)) invalid("sigma.int", "> 0", num(c.sigma_int));
    if (!(c.sigma_out > 0.0) || !std::isfinite(c.sigma_out)) invalid("sigma.out", "> 0", num(c.sigma_out));
    if (!(c.alpha > 0.0) || !std::isfinite(c.alpha)) invalid("alpha", "> 0", num(c.alpha));
    static const std::set<std::string> kinds{"linear", "tanh", "sine", "cubic"};
    if (!kinds.count(c.f_kind)) invalid("f.kind", "linear, tanh, sine or cubic", c.f_kind);
    if (!(c.f_kappa > 0.0) || !std::isfinite(c.f_kappa)) invalid("f.kappa", "> 0", num(c.f_kappa));
    if (!(c.f_delta_shift > 0.0 && c.f_delta_shift <= 1.0)) {
        invalid("f.delta_shift", "(0, 1]", num(c.f_delta_shift));
    }
    static const std::set<std::string> spatial{"constant", "affine", "sines"};
    if (!spatial.count(c.psi_spatial)) invalid("psi.spatial", "constant, affine or sines", c.psi_spatial);
    static const std::set<std::string> temporal{"constant", "sine", "offset_sine"};
    if (!temporal.count(c.psi_temporal)) {
        invalid("psi.temporal", "constant, sine or offset_sine", c.psi_temporal);
    }
    if (!std::isfinite(c.psi_amplitude) || std::abs(c.psi_amplitude) > 1e6) {
        invalid("psi.amplitude", "finite, |value| <= 1e6", num(c.psi_amplitude));
    }
    if (!std::isfinite(c.psi_offset) || std::abs(c.psi_offset) > 1e6) {
        invalid("psi.offset", "finite, |value| <= 1e6", num(c.psi_offset));
    }
    if (!(c.dt <= 0.5) || !integer_reciprocal(c.dt)) invalid("time.dt", "(0, 0.5] with 1/dt an integer", num(c.dt));
    if (!(c.horizon > 0.0) || c.horizon > 1e4) invalid("time.horizon", "(0, 1e4]", num(c.horizon));
    if (std::abs(c.horizon / c.dt - std::round(c.horizon / c.dt)) > 1e-6) {
        invalid("time.horizon", "an integer multiple of time.dt", num(c.horizon));
    }
    if (c.sample_stride < 1) invalid("time.sample_stride", ">= 1", std::to_string(c.sample_stride));
    static const std::set<std::string> init{"zero", "uniform", "smooth", "random"};
    if (!init.count(c.init_kind)) invalid("init.kind", "zero, uniform, smooth or random", c.init_kind);
    if (!std::isfinite(c.init_amplitude) || std::abs(c.init_amplitude) > 1e6) {
        invalid("init.amplitude", "finite, |value| <= 1e6", num(c.init_amplitude));
    }
    if (!(c.newton_tol > 0.0 && c.newton_tol < 1.0)) invalid("solver.newton_tol", "(0, 1)", num(c.newton_tol));
    if (c.newton_max_iters < 1 || c.newton_max_iters > 10000) {
        invalid("solver.newton_max_iters", "[1, 10000]", std::to_string(c.newton_max_iters));
    }
    if (!(c.linear_tol > 0.0 && c.linear_tol < 1.0)) invalid("solver.linear_tol", "(0, 1)", num(c.linear_tol));
    if (c.linear_max_iters < 1 || c.linear_max_iters > 100000) {
        invalid("solver.linear_max_iters", "[1, 100000]", std::to_string(c.linear_max_iters));
    }
    if (!(c.periodic_tol > 0.0 && c.periodic_tol < 1.0)) invalid("periodic.tol", "(0, 1)", num(c.periodic_tol));
    if (c.periodic_max_iters < 1 || c.periodic_max_iters > 100000) {
        invalid("periodic.max_iters", "[1, 100000]", std::to_string(c.periodic_max_iters));
    }
    if (c.periodic_method != "picard" && c.periodic_method != "delta") {
        invalid("periodic.method", "picard or delta", c.periodic_method);
    }
    for (std::size_t i = 0; i < c.periodic_deltas.size(); ++i) {
        const double d = c.periodic_deltas[i];
        if (!(d >= 1e-6 && d <= 1.0) || (i > 0 && !(d < c.periodic_deltas[i - 1]))) {
            invalid("periodic.deltas", "strictly decreasing values in [1e-6, 1]", list(c.periodic_deltas));
        }
    }
    if (c.macro_resolution < 1 || c.macro_resolution > 64) {
        invalid("macro.resolution", "integer in [1, 64]", std::to_string(c.macro_resolution));
    }
    if (c.macro_dimension != c.dimension) {
        invalid("macro.dimension", "equal to dimension", std::to_string(c.macro_dimension));
    }
    for (double e : c.compare_epsilons) {
        if (!integer_reciprocal(e)) invalid("compare.epsilons", "values in (0, 1] with integer reciprocals", list(c.compare_epsilons));
    }
    if (c.output.empty()) invalid("output", "a non-empty path", "''");
    for (double e : std::vector<double>{c.epsilon}) {
        try {
            (void)c.domain(e);
        } catch (const GeometryError& err) {
            invalid("epsilon", "a tiling within the unknown budget", err.what());
        }
    }
}

RunConfig parse_config_text(const std::string& text, const std::string& source) {
    std::map<std::string, const Field*> by_key;
    for (const auto& f : fields()) by_key[f.key] = &f;

    RunConfig c;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        boost::algorithm::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(kExitParse, fmt::format("{}:{}: expected 'key = value'", source, lineno));
        }
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        boost::algorithm::trim(key);
        boost::algorithm::trim(value);
        if (key.empty()) throw ConfigError(kExitParse, fmt::format("{}:{}: empty key", source, lineno));
        if (value.empty()) {
            throw ConfigError(kExitParse, fmt::format("{}:{}: empty value for '{}'", source, lineno, key));
        }
        const auto it = by_key.find(key);
        if (it == by_key.end()) {
            throw ConfigError(kExitValidation, fmt::format("{}:{}: unknown key '{}'", source, lineno, key));
        }
        if (!seen.insert(key).second) {
            throw ConfigError(kExitParse, fmt::format("{}:{}: duplicate key '{}'", source, lineno, key));
        }
        try {
            it->second->parse(c, value);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(kExitParse,
                              fmt::format("{}:{}: field '{}': {}, got '{}'", source, lineno, key, e.what(), value));
        }
    }
    if (!seen.count("macro.dimension")) c.macro_dimension = c.dimension;
    validate(c);
    return c;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(kExitParse, fmt::format("{}: cannot open configuration file", path));
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

std::string render_config(const RunConfig& c) {
    std::string out;
    for (const auto& f : fields()) out += fmt::format("{} = {}\n", f.key, f.render(c));
    return out;
}

std::string config_hash(const RunConfig& c) {
    const std::string text = render_config(c);
    boost::crc_32_type crc;
    crc.process_bytes(text.data(), text.size());
    return fmt::format("{:08x}", crc.checksum());
}

}  // namespace tissue
