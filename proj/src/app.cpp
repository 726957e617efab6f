#include "tissue/app.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "tissue/decay_analysis.hpp"
#include "tissue/errors.hpp"
#include "tissue/micro_solver.hpp"
#include "tissue/periodic_solver.hpp"
#include "tissue/two_scale.hpp"

namespace tissue {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

/// Missing input artifact; maps to the validation exit code.
class MissingDependency : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

const std::vector<std::pair<const char*, const char*>>& module_versions() {
    static const std::vector<std::pair<const char*, const char*>> v = {
        {"cell_geometry", "1.0"}, {"nonlinearity", "1.0"},   {"micro_solver", "1.0"},
        {"periodic_solver", "1.0"}, {"decay_analysis", "1.0"}, {"two_scale_solver", "1.0"},
        {"cli_io", "1.0"},
    };
    return v;
}

struct Context {
    RunConfig config;
    fs::path out;
    std::string hash;
    int threads = 1;
};

json meta(const Context& ctx, const std::string& subcommand) {
    json m;
    m["version"] = kVersion;
    m["subcommand"] = subcommand;
    m["config_hash"] = ctx.hash;
    json mods;
    for (const auto& [k, v] : module_versions()) mods[k] = v;
    m["modules"] = mods;
    return m;
}

std::string fmt_num(double x) { return fmt::format("{:.17g}", x); }

class CsvWriter {
public:
    CsvWriter(const Context& ctx, const std::string& name, const std::vector<std::string>& columns)
        : out_(ctx.out / name) {
        if (!out_) throw std::runtime_error("cannot write " + (ctx.out / name).string());
        std::string mods;
        for (const auto& [k, v] : module_versions()) mods += fmt::format("{}{}={}", mods.empty() ? "" : ";", k, v);
        out_ << fmt::format("# tissue {} config_hash={} modules={}\n", kVersion, ctx.hash, mods);
        for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
        out_ << '\n';
    }
    void row(const std::vector<double>& values) {
        for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << fmt_num(values[i]);
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

void write_json(const Context& ctx, const std::string& name, const json& j) {
    std::ofstream out(ctx.out / name);
    if (!out) throw std::runtime_error("cannot write " + (ctx.out / name).string());
    out << j.dump(2) << '\n';
}

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json energy_json(const EnergyReport& e) {
    return {{"gradient_lhs", e.gradient_lhs}, {"gradient_rhs", e.gradient_rhs},
            {"gradient_margin", e.gradient_margin()}, {"rate_lhs", e.rate_lhs},
            {"rate_rhs", e.rate_rhs}, {"rate_margin", e.rate_margin()},
            {"lambda1", e.lambda1}, {"lambda2", e.lambda2}, {"pass", e.pass()}};
}

json orbit_json(const PeriodicOrbit& o) {
    json j;
    j["method"] = o.method;
    j["defect"] = o.defect;
    j["iterations"] = o.iterations;
    j["defects"] = o.defects;
    j["defect_monotone"] = o.defect_monotone;
    j["theta"] = o.theta;
    if (o.delta) j["delta"] = *o.delta;
    return j;
}

json rate_json(const RateFit& r) {
    return {{"rate", r.rate}, {"r2", r.r2}, {"classification", r.classification}, {"points", r.points}};
}

/// Fields that fix the discrete jump dynamics; an orbit artifact is reusable only if they agree.
std::string dynamics_key(const RunConfig& c) {
    return fmt::format("dim={} a={} m={} eps={} sigma={},{} alpha={} f={}:{} psi={}:{}:{}:{} dt={}",
                       c.dimension, c.inclusion_margin, c.cell_resolution, c.epsilon, c.sigma_int,
                       c.sigma_out, c.alpha, c.f_kind, c.f_kappa, c.psi_spatial, c.psi_temporal,
                       c.psi_amplitude, c.psi_offset, c.dt);
}

/// Orbit by the configured method: direct Picard, or the delta path followed by a direct
/// Picard run warm-started from the last regularized orbit.
PeriodicOrbit configured_orbit(const MembraneSystem& sys, const Nonlinearity& f, const RunConfig& c,
                               json* report) {
    const SolverParams p = c.solver();
    const Eigen::VectorXd w0 = Eigen::VectorXd::Zero(sys.size());
    if (c.periodic_method == "delta") {
        const auto reg = find_periodic_regularized(sys, f, p, c.periodic_deltas, w0, c.picard());
        PeriodicOrbit direct = find_periodic(sys, f, p, reg.orbits.back().start(), c.picard());
        if (report) {
            (*report)["deltas"] = reg.deltas;
            (*report)["delta_differences"] = reg.differences;
            (*report)["delta_to_direct"] = orbit_difference(sys, reg.orbits.back(), direct);
        }
        direct.method = "delta+picard";
        return direct;
    }
    return find_periodic(sys, f, p, w0, c.picard());
}

int cmd_simulate(const Context& ctx) {
    const RunConfig& c = ctx.config;
    const MicroSystem sys(c.domain(c.epsilon), c.sigma(), c.boundary());
    const auto f = c.nonlinearity();
    const SolverParams p = c.solver();
    const Eigen::VectorXd w0 = initial_jump_micro(c.initial_jump(), sys.domain());
    spdlog::info("simulate: {} cells, {} facets, {} steps", sys.bulk().cells(), sys.size(), c.total_steps());
    const auto traj = simulate(sys, f, p, w0, c.total_steps(), c.sample_stride);

    CsvWriter csv(ctx, "simulate.csv",
                  {"t", "L2_bulk", "L2_grad", "L2_jump", "energy", "newton_iters", "energy_residual"});
    for (std::size_t k = 0; k < traj.jumps.size(); ++k) {
        const double pt = sys.boundary().temporal_value(traj.times[k]);
        const auto n = sys.norms(traj.jumps[k], pt);
        csv.row({traj.times[k], n[0], n[1], n[2], sys.energy(traj.jumps[k], pt),
                 static_cast<double>(traj.newton_iters[k]), traj.energy_residual[k]});
    }
    double worst = 0.0;
    for (double r : traj.energy_residual) worst = std::max(worst, std::abs(r));
    const auto st = sys.state(traj.jumps.back(), traj.times.back());
    json j;
    j["meta"] = meta(ctx, "simulate");
    j["cells"] = sys.bulk().cells();
    j["facets"] = sys.size();
    j["steps"] = traj.total_steps;
    j["max_newton_iters"] = traj.max_newton_iters;
    j["shifted_steps"] = traj.shifted_steps;
    j["max_energy_residual"] = worst;
    j["final_flux_residual"] = st.flux_residual;
    j["final_trace_defect"] = st.trace_defect;
    write_json(ctx, "simulate.json", j);
    return kExitOk;
}

int cmd_periodic(const Context& ctx) {
    const RunConfig& c = ctx.config;
    const MicroSystem sys(c.domain(c.epsilon), c.sigma(), c.boundary());
    const auto f = c.nonlinearity();
    const SolverParams p = c.solver();
    json j;
    j["meta"] = meta(ctx, "periodic");
    const PeriodicOrbit orb = configured_orbit(sys, f, c, &j);
    const auto& cert = f.certificate();
    const auto energy = verify_energy_estimates(sys, f, p, orb, cert.lambda1, cert.lambda2);
    spdlog::info("periodic: defect {:.3e} after {} iterations", orb.defect, orb.iterations);

    CsvWriter csv(ctx, "orbit.csv", {"t", "L2_bulk", "L2_grad", "L2_jump", "energy"});
    for (std::size_t k = 0; k < orb.orbit.jumps.size(); k += c.sample_stride) {
        const double t = orb.orbit.times[k];
        const double pt = sys.boundary().temporal_value(t);
        const auto n = sys.norms(orb.orbit.jumps[k], pt);
        csv.row({t, n[0], n[1], n[2], sys.energy(orb.orbit.jumps[k], pt)});
    }
    j["dynamics"] = dynamics_key(c);
    j["facets"] = sys.size();
    j["dt"] = c.dt;
    j["orbit"] = orbit_json(orb);
    j["energy_estimates"] = energy_json(energy);
    j["start"] = vec(orb.start());
    write_json(ctx, "periodic.json", j);
    return kExitOk;
}

PeriodicOrbit load_orbit(const Context& ctx, const MembraneSystem& sys, const Nonlinearity& f) {
    const fs::path path = ctx.out / "periodic.json";
    if (!fs::exists(path)) {
        throw MissingDependency("decay needs " + path.string() + "; run `periodic` first");
    }
    std::ifstream in(path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw MissingDependency(path.string() + " is unreadable: " + e.what());
    }
    if (j.value("dynamics", std::string()) != dynamics_key(ctx.config) ||
        j.value("facets", -1) != sys.size()) {
        throw MissingDependency(path.string() + " was produced for a different grid or model");
    }
    const auto start = j.at("start").get<std::vector<double>>();
    const Eigen::VectorXd w0 = Eigen::Map<const Eigen::VectorXd>(start.data(), start.size());
    const SolverParams p = ctx.config.solver();
    PeriodicOrbit orb;
    orb.orbit = simulate(sys, f, p, w0, p.steps_per_period());
    orb.defect = sys.weighted_norm(orb.orbit.jumps.back() - w0);
    orb.method = j.at("orbit").value("method", std::string("picard"));
    return orb;
}

int cmd_decay(const Context& ctx) {
    const RunConfig& c = ctx.config;
    const MicroSystem sys(c.domain(c.epsilon), c.sigma(), c.boundary());
    const auto f = c.nonlinearity();
    const SolverParams p = c.solver();
    const PeriodicOrbit orb = load_orbit(ctx, sys, f);
    const Eigen::VectorXd w0 = initial_jump_micro(c.initial_jump(), sys.domain());
    const auto traj = simulate(sys, f, p, w0, c.total_steps(), c.sample_stride);
    const auto rep = decay_metrics(sys, f, p, traj, orb);
    const auto inv = check_decay_invariants(sys, rep);

    CsvWriter csv(ctx, "decay.csv", {"t", "L2_bulk", "L2_grad", "L2_jump", "lyapunov", "secant_min"});
    for (std::size_t k = 0; k < rep.times.size(); ++k) {
        csv.row({rep.times[k], rep.norms[k][0], rep.norms[k][1], rep.norms[k][2], rep.lyapunov[k],
                 rep.secant_min[k]});
    }
    const int below = rep.first_below(1e-3);
    json j;
    j["meta"] = meta(ctx, "decay");
    j["orbit_defect"] = orb.defect;
    j["rate"] = rate_json(rep.rate);
    j["lyapunov_monotone"] = rep.lyapunov_monotone;
    j["max_lyapunov_increase"] = rep.max_lyapunov_increase;
    j["first_below_1e-3"] = below < 0 ? json(nullptr) : json(rep.times[below]);
    j["invariants"] = {{"stability_constant", inv.stability_constant},
                       {"poincare_constant", inv.poincare_constant},
                       {"worst_gradient_ratio", inv.worst_gradient_ratio},
                       {"worst_poincare_ratio", inv.worst_poincare_ratio},
                       {"pass", inv.pass()}};
    write_json(ctx, "decay.json", j);
    return kExitOk;
}

int cmd_homogenize(const Context& ctx) {
    const RunConfig& c = ctx.config;
    const TwoScaleSystem sys(build_macro_mesh(c.macro_dimension, c.macro_resolution), c.cell(),
                             c.sigma(), c.boundary());
    const auto f = c.nonlinearity();
    const SolverParams p = c.solver();
    json j;
    j["meta"] = meta(ctx, "homogenize");
    const PeriodicOrbit orb = configured_orbit(sys, f, c, &j);
    const Eigen::VectorXd w0 = sys.initial_jump(c.initial_jump());
    const auto traj = simulate(sys, f, p, w0, c.total_steps(), c.sample_stride);
    const auto rep = decay_metrics(sys, f, p, traj, orb);
    double max_mean = 0.0;
    double max_macro = 0.0;
    for (std::size_t k = 0; k < traj.jumps.size(); ++k) {
        const auto st = sys.state(traj.jumps[k], traj.times[k]);
        max_mean = std::max(max_mean, st.max_mean);
        max_macro = std::max(max_macro, st.macro_residual);
    }
    const auto weak = weak_form_residual(sys, f, p, orb.orbit, true);
    const auto& cert = f.certificate();
    const auto bound = orbit_energy_bound(sys, f, p, orb, cert.lambda1, cert.lambda2);

    CsvWriter csv(ctx, "homogenize.csv",
                  {"t", "H1_macro", "L2_corrector", "L2_grad_y", "L2_jump", "lyapunov"});
    for (std::size_t k = 0; k < rep.times.size(); ++k) {
        const auto& n = rep.norms[k];
        csv.row({rep.times[k], n[0], n[1], n[2], n[3], rep.lyapunov[k]});
    }
    const int below = rep.first_below(1e-3);
    json A = json::array();
    for (int r = 0; r < sys.cell().A_hom.rows(); ++r) A.push_back(vec(sys.cell().A_hom.row(r).transpose()));
    j["effective_conductivity"] = A;
    j["macro_elements"] = sys.mesh().element_count();
    j["facets_per_cell"] = sys.cell().facets();
    j["orbit"] = orbit_json(orb);
    j["rate"] = rate_json(rep.rate);
    j["lyapunov_monotone"] = rep.lyapunov_monotone;
    j["first_below_1e-3"] = below < 0 ? json(nullptr) : json(rep.times[below]);
    j["max_corrector_mean"] = max_mean;
    j["max_macro_residual"] = max_macro;
    j["periodic_weak_form_residual"] = weak.max();
    j["energy_bound"] = {{"lhs", bound.lhs}, {"gamma", bound.gamma}, {"pass", bound.pass()}};
    write_json(ctx, "homogenize.json", j);
    return kExitOk;
}

int cmd_compare(const Context& ctx) {
    const RunConfig& c = ctx.config;
    if (c.init_kind == "random") {
        throw ConfigError(kExitValidation,
                          "compare needs a two-scale consistent initial jump (init.kind zero, uniform or smooth)");
    }
    const auto f = c.nonlinearity();
    const SolverParams p = c.solver();
    const int steps = c.total_steps();
    const TwoScaleSystem macro(build_macro_mesh(c.macro_dimension, c.macro_resolution), c.cell(),
                               c.sigma(), c.boundary());
    const auto macro_traj = simulate(macro, f, p, macro.initial_jump(c.initial_jump()), steps, steps);
    const Eigen::VectorXd w_macro = macro_traj.jumps.back();

    const std::size_t n = c.compare_epsilons.size();
    std::vector<double> errors(n, 0.0);
    std::vector<int> facets(n, 0);
    std::vector<std::string> failures(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                const MicroSystem micro(c.domain(c.compare_epsilons[i]), c.sigma(), c.boundary());
                const auto traj = simulate(micro, f, p, initial_jump_micro(c.initial_jump(), micro.domain()),
                                           steps, steps);
                errors[i] = micro_two_scale_error(micro, traj.jumps.back(), macro, w_macro, traj.times.back());
                facets[i] = micro.size();
            } catch (const std::exception& e) {
                failures[i] = e.what();
            }
        }
    };
    const int nt = std::max(1, std::min<int>(ctx.threads, static_cast<int>(n)));
    std::vector<std::thread> pool;
    for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (const auto& msg : failures) {
        if (!msg.empty()) throw SolverError("compare: " + msg);
    }

    CsvWriter csv(ctx, "compare.csv", {"epsilon", "l2_error", "facets"});
    for (std::size_t i = 0; i < n; ++i) csv.row({c.compare_epsilons[i], errors[i], static_cast<double>(facets[i])});
    // ordered by decreasing epsilon
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return c.compare_epsilons[a] > c.compare_epsilons[b]; });
    bool monotone = true;
    for (std::size_t k = 1; k < n; ++k) monotone = monotone && errors[order[k]] < errors[order[k - 1]];
    json j;
    j["meta"] = meta(ctx, "compare");
    j["time"] = steps * c.dt;
    j["epsilons"] = c.compare_epsilons;
    j["l2_errors"] = errors;
    j["decreasing_in_epsilon"] = monotone;
    write_json(ctx, "compare.json", j);
    return kExitOk;
}

double max_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

int cmd_verify(const Context& ctx) {
    const auto checks = run_invariant_suite(ctx.config);
    json list = json::array();
    bool all = true;
    for (const auto& ch : checks) {
        all = all && ch.pass;
        list.push_back({{"name", ch.name}, {"pass", ch.pass}, {"value", ch.value},
                        {"threshold", ch.threshold}, {"note", ch.note}});
        if (ch.pass) spdlog::info("{}: pass ({:.3e} vs {:.3e})", ch.name, ch.value, ch.threshold);
        else spdlog::error("{}: FAIL ({:.3e} vs {:.3e}) {}", ch.name, ch.value, ch.threshold, ch.note);
    }
    json j;
    j["meta"] = meta(ctx, "verify");
    j["invariants"] = list;
    j["all_pass"] = all;
    write_json(ctx, "verify.json", j);
    return all ? kExitOk : kExitInvariant;
}

}  // namespace

std::vector<InvariantCheck> run_invariant_suite(const RunConfig& c) {
    std::vector<InvariantCheck> out;
    // value <= threshold passes
    auto check = [&out](const std::string& name, double threshold, const std::function<double()>& fn,
                        const std::string& note = "") {
        InvariantCheck ch{name, false, 0.0, threshold, note};
        try {
            ch.value = fn();
            ch.pass = ch.value <= threshold;
        } catch (const std::exception& e) {
            ch.value = std::numeric_limits<double>::quiet_NaN();
            ch.note = e.what();
        }
        out.push_back(ch);
    };

    const EpsilonDomain dom = c.domain(c.epsilon);
    const BoundaryData psi = c.boundary();
    const MicroSystem sys(dom, c.sigma(), psi);
    const auto f = c.nonlinearity();
    const SolverParams p = c.solver();
    const int nf = sys.size();
    const int short_run = std::min(100, p.steps_per_period());

    check("geometry.membrane_measure", 1e-12, [&] {
        const double expected = dom.cell.membrane_measure / c.epsilon;
        return std::abs(dom.membrane_measure - expected) / expected;
    });
    check("geometry.boundary_gap", 1e-12, [&] { return c.inclusion_margin * c.epsilon - dom.boundary_gap; });
    check("nonlinearity.certificate", 0.0, [&] {
        const auto& cert = f.certificate();
        return (cert.monotone && cert.f0_zero && cert.lambda1 > 0.0) ? 0.0 : 1.0;
    }, "monotone, f(0)=0 and lambda1>0");
    check("micro.zero_exactness", 1e-13, [&] {
        BoundaryData zero = psi;
        zero.amplitude = 0.0;
        const MicroSystem z(dom, c.sigma(), zero);
        const auto traj = simulate(z, f, p, Eigen::VectorXd::Zero(nf), short_run, short_run);
        double m = 0.0;
        for (const auto& w : traj.jumps) {
            m = std::max(m, max_abs(w));
            m = std::max(m, max_abs(z.bulk_values(w, 0.0)));
        }
        return m;
    });
    check("micro.constant_state", 1e-13, [&] {
        BoundaryData k = psi;
        k.spatial = BoundaryData::Spatial::kConstant;
        const MicroSystem s(dom, c.sigma(), k);
        const auto traj = simulate(s, f, p, Eigen::VectorXd::Zero(nf), short_run, short_run);
        const double t = traj.times.back();
        const auto st = s.state(traj.jumps.back(), t);
        return std::max(max_abs(traj.jumps.back()), max_abs(st.u.array() - k.amplitude * k.temporal_value(t)));
    });
    if (sys.dense_schur() && nf <= 2048) {
        check("micro.schur_psd", 1e-10, [&] {
            Eigen::MatrixXd S(nf, nf);
            Eigen::VectorXd col;
            for (int j = 0; j < nf; ++j) {
                sys.apply_schur(Eigen::VectorXd::Unit(nf, j), col);
                S.col(j) = col;
            }
            const Eigen::MatrixXd W = sys.weights().asDiagonal() * S;
            const double asym = (W - W.transpose()).cwiseAbs().maxCoeff();
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (W + W.transpose()), Eigen::EigenvaluesOnly);
            const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
            return std::max(asym, -es.eigenvalues().minCoeff()) / scale;
        });
    }
    const Eigen::VectorXd wa = initial_jump_micro({InitialJump::Kind::kRandom, c.init_amplitude, c.seed}, dom);
    const Eigen::VectorXd wb = initial_jump_micro({InitialJump::Kind::kRandom, c.init_amplitude, c.seed + 1}, dom);
    check("micro.dissipation_identity", 1e-10, [&] {
        Eigen::VectorXd a = wa, b = wb;
        double worst = 0.0;
        for (int n = 1; n <= short_run; ++n) {
            const double t = n * p.dt;
            const auto ra = step(sys, f, p, a, t);
            const auto rb = step(sys, f, p, b, t);
            const auto d = dissipation_identity(sys, f, p, a, b, ra.w, rb.w);
            const Eigen::VectorXd jump = (ra.w - rb.w) - (a - b);
            const double closure = 0.5 * p.alpha / sys.length_scale() * sys.weighted_dot(jump, jump);
            const double scale = std::max({1.0, std::abs(d.bulk_term), std::abs(d.membrane_storage_delta),
                                           std::abs(d.membrane_dissipation)});
            worst = std::max(worst, std::abs(d.sum() + closure) / scale);
            a = ra.w;
            b = rb.w;
        }
        return worst;
    });
    check("micro.lyapunov_monotone", 1e-10, [&] {
        const auto ta = simulate(sys, f, p, wa, p.steps_per_period());
        const auto tb = simulate(sys, f, p, wb, p.steps_per_period());
        const auto e = lyapunov_series(sys, p, ta, tb);
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 1; k < e.size(); ++k) worst = std::max(worst, e[k] - e[k - 1]);
        return worst;
    }, "max increase of E over one period");
    check("micro.energy_balance", 1e-9, [&] {
        const auto traj = simulate(sys, f, p, wa, short_run);
        double m = 0.0;
        for (double r : traj.energy_residual) m = std::max(m, std::abs(r));
        return m;
    });
    check("micro.negation_symmetry", 1e-10, [&] {
        BoundaryData neg = psi;
        neg.amplitude = -psi.amplitude;
        const MicroSystem sn(dom, c.sigma(), neg);
        const auto a = simulate(sys, f, p, wa, short_run, short_run);
        const auto b = simulate(sn, f, p, -wa, short_run, short_run);
        return max_abs(a.jumps.back() + b.jumps.back());
    }, "all built-in membrane functions are odd");
    check("micro.scaling_invariance", 1e-10, [&] {
        const double k = 3.0;
        const MicroSystem sk(dom, {k * c.sigma_int, k * c.sigma_out}, psi);
        SolverParams pk = p;
        pk.alpha = k * p.alpha;
        const auto a = simulate(sys, make_nonlinearity("linear", c.f_kappa), p, wa, short_run, short_run);
        const auto b = simulate(sk, make_nonlinearity("linear", k * c.f_kappa), pk, wa, short_run, short_run);
        return max_abs(a.jumps.back() - b.jumps.back());
    }, "linear f with sigma, alpha, kappa scaled by a common factor");

    std::optional<PeriodicOrbit> orbit;
    check("periodic.defect", c.periodic_tol, [&] {
        orbit = configured_orbit(sys, f, c, nullptr);
        return orbit->defect;
    });
    check("periodic.energy_estimates", 0.0, [&] {
        if (!orbit) throw SolverError("no orbit");
        const auto& cert = f.certificate();
        const auto e = verify_energy_estimates(sys, f, p, *orbit, cert.lambda1, cert.lambda2);
        return -std::min(e.gradient_margin(), e.rate_margin());
    }, "negative of the smaller margin");

    const CellGeometry cell = c.cell();
    const TwoScaleSystem two(build_macro_mesh(c.macro_dimension, c.macro_resolution), cell, c.sigma(), psi);
    check("two_scale.cell_identities", 1e-12, [&] {
        const auto& op = two.cell();
        const double hf = cell.grid.face_measure();
        return std::max((op.C + hf * op.Q_G.transpose()).cwiseAbs().maxCoeff(),
                        (op.A_hom - op.A_hom.transpose()).cwiseAbs().maxCoeff());
    });
    Trajectory two_traj;
    check("two_scale.zero_mean", 1e-12, [&] {
        const Eigen::VectorXd w0 = two.initial_jump({InitialJump::Kind::kSmooth, c.init_amplitude, c.seed});
        two_traj = simulate(two, f, p, w0, std::min(50, p.steps_per_period()));
        double m = 0.0;
        for (std::size_t k = 0; k < two_traj.jumps.size(); ++k) {
            m = std::max(m, two.state(two_traj.jumps[k], two_traj.times[k]).max_mean);
        }
        return m;
    });
    check("two_scale.macro_residual", 1e-8, [&] {
        double m = 0.0;
        for (std::size_t k = 0; k < two_traj.jumps.size(); ++k) {
            m = std::max(m, two.state(two_traj.jumps[k], two_traj.times[k]).macro_residual);
        }
        return m;
    });
    check("two_scale.weak_form", 1e-8, [&] { return weak_form_residual(two, f, p, two_traj, false).max(); });
    check("two_scale.reduction_to_cell", 1e-9, [&] {
        BoundaryData k = psi;
        k.spatial = BoundaryData::Spatial::kConstant;
        const TwoScaleSystem one(build_macro_mesh(c.dimension, 1), cell, c.sigma(), k);
        const MicroSystem micro(tile_domain(cell, 1.0), c.sigma(), k);
        const InitialJump init{InitialJump::Kind::kUniform, c.init_amplitude, c.seed};
        const auto a = simulate(one, f, p, one.initial_jump(init), short_run, short_run);
        const auto b = simulate(micro, f, p, initial_jump_micro(init, micro.domain()), short_run, short_run);
        const int n = micro.size();
        double m = 0.0;
        for (int e = 0; e < one.mesh().element_count(); ++e) {
            m = std::max(m, max_abs(a.jumps.back().segment(e * n, n) - b.jumps.back()));
        }
        return m;
    }, "single macro element with constant data against the micro problem at epsilon = 1");
    return out;
}

int run(const std::string& subcommand, const RunConfig& c, const RunOptions& options) {
    Context ctx;
    ctx.config = c;
    ctx.out = options.out_dir.empty() ? fs::path(c.output) : fs::path(options.out_dir);
    ctx.hash = config_hash(c);
    ctx.threads = std::max(1, options.threads);
    try {
        fs::create_directories(ctx.out);
        {
            std::ofstream echo(ctx.out / "effective.cfg");
            echo << render_config(c);
        }
        if (subcommand == "simulate") return cmd_simulate(ctx);
        if (subcommand == "periodic") return cmd_periodic(ctx);
        if (subcommand == "decay") return cmd_decay(ctx);
        if (subcommand == "homogenize") return cmd_homogenize(ctx);
        if (subcommand == "verify") return cmd_verify(ctx);
        if (subcommand == "compare") return cmd_compare(ctx);
        spdlog::error("unknown subcommand '{}'", subcommand);
        return kExitValidation;
    } catch (const ConfigError& e) {
        spdlog::error("{}", e.what());
        return e.code();
    } catch (const MissingDependency& e) {
        spdlog::error("{}", e.what());
        return kExitValidation;
    } catch (const SolverError& e) {
        spdlog::error("solver failure: {}", e.what());
        return kExitSolver;
    } catch (const std::invalid_argument& e) {
        spdlog::error("invalid input: {}", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitSolver;
    }
}

std::string describe_outputs() {
    return "Artifacts (written to --out, default: the configured output directory):\n"
           "  every subcommand: effective.cfg (canonical echo of the configuration)\n"
           "  CSV files start with a '# tissue <version> config_hash=<crc32> modules=...' line,\n"
           "  then one header row.\n"
           "  simulate   simulate.csv  t,L2_bulk,L2_grad,L2_jump,energy,newton_iters,energy_residual\n"
           "             simulate.json run summary\n"
           "  periodic   orbit.csv     t,L2_bulk,L2_grad,L2_jump,energy (one period)\n"
           "             periodic.json defect history, energy estimates, orbit start\n"
           "  decay      decay.csv     t,L2_bulk,L2_grad,L2_jump,lyapunov,secant_min\n"
           "             decay.json    rate fit, monotonicity, invariants (needs periodic.json)\n"
           "  homogenize homogenize.csv t,H1_macro,L2_corrector,L2_grad_y,L2_jump,lyapunov\n"
           "             homogenize.json effective conductivity, orbit, rate, weak-form residual\n"
           "  compare    compare.csv   epsilon,l2_error,facets\n"
           "             compare.json  errors at t = time.horizon and monotonicity flag\n"
           "  verify     verify.json   every invariant with its value, threshold and status\n"
           "Exit codes: 0 ok, 1 solver failure, 2 parse error, 3 validation error or missing\n"
           "input artifact, 4 invariant failure.\n";
}

}  // namespace tissue
