#include "tissue/periodic_solver.hpp"

#include <sstream>

#include <spdlog/spdlog.h>

#include "tissue/errors.hpp"

namespace tissue {

Eigen::VectorXd poincare_map(const MembraneSystem& sys, const Nonlinearity& f,
                             const SolverParams& p, const Eigen::VectorXd& w0) {
    const int n = p.steps_per_period();
    Eigen::VectorXd w = w0;
    for (int k = 0; k < n; ++k) w = step(sys, f, p, w, (k + 1) * p.dt).w;
    return w;
}

PeriodicOrbit find_periodic(const MembraneSystem& sys, const Nonlinearity& f,
                            const SolverParams& p, const Eigen::VectorXd& w0,
                            const PicardOptions& opts) {
    if (!(opts.tol > 0.0)) throw std::invalid_argument("periodic tolerance must be positive");
    if (!(opts.theta > 0.0 && opts.theta <= 1.0)) {
        throw std::invalid_argument("Picard damping theta must lie in (0, 1]");
    }
    const int n = p.steps_per_period();
    PeriodicOrbit out;
    out.theta = opts.theta;
    Eigen::VectorXd w = w0;
    for (int it = 0; it < opts.max_iters; ++it) {
        Trajectory tr = simulate(sys, f, p, w, n, 1);
        const Eigen::VectorXd& pw = tr.jumps.back();
        const double defect = sys.weighted_norm(pw - w);
        if (!out.defects.empty() && out.theta == 1.0 &&
            defect > out.defects.back() * (1.0 + 1e-9) + 1e-15) {
            out.defect_monotone = false;
        }
        out.defects.push_back(defect);
        out.iterations = it + 1;
        spdlog::debug("Picard {}: defect {:.3e}", it + 1, defect);
        if (defect <= opts.tol) {
            out.defect = defect;
            out.orbit = std::move(tr);
            return out;
        }
        const int k = static_cast<int>(out.defects.size());
        if (k > opts.stall_window &&
            defect >= 0.999 * out.defects[k - 1 - opts.stall_window] && out.theta > 1.0 / 64.0) {
            out.theta *= 0.5;
            spdlog::info("Picard stalled; damping theta -> {}", out.theta);
        }
        w = (1.0 - out.theta) * w + out.theta * pw;
    }
    std::ostringstream os;
    os << "Picard iteration did not reach defect " << opts.tol << " in " << opts.max_iters
       << " iterations (last " << out.defects.back() << ")";
    throw SolverError(os.str(), out.defects);
}

RegularizedOrbits find_periodic_regularized(const MembraneSystem& sys, const Nonlinearity& f,
                                            const SolverParams& p,
                                            const std::vector<double>& deltas,
                                            const Eigen::VectorXd& w0,
                                            const PicardOptions& opts) {
    if (deltas.empty()) throw std::invalid_argument("delta sequence is empty");
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        if (deltas[i] < 1e-6) {
            throw std::invalid_argument("delta values below 1e-6 are rejected");
        }
        if (i > 0 && !(deltas[i] < deltas[i - 1])) {
            throw std::invalid_argument("delta sequence must be strictly decreasing");
        }
    }
    RegularizedOrbits out;
    Eigen::VectorXd start = w0;
    for (double d : deltas) {
        const Nonlinearity fd = regularize(f, d);
        PeriodicOrbit orb = find_periodic(sys, fd, p, start, opts);
        orb.method = "delta_sequence";
        orb.delta = d;
        start = orb.start();
        if (!out.orbits.empty()) out.differences.push_back(orbit_difference(sys, out.orbits.back(), orb));
        out.deltas.push_back(d);
        out.orbits.push_back(std::move(orb));
    }
    return out;
}

double orbit_difference(const MembraneSystem& sys, const PeriodicOrbit& a, const PeriodicOrbit& b) {
    if (a.orbit.jumps.size() != b.orbit.jumps.size() || a.orbit.dt != b.orbit.dt) {
        throw std::invalid_argument("orbits do not share the time grid");
    }
    double s = 0.0;
    for (std::size_t k = 1; k < a.orbit.jumps.size(); ++k) {
        const Eigen::VectorXd d = a.orbit.jumps[k] - b.orbit.jumps[k];
        s += a.orbit.dt * sys.weighted_dot(d, d);
    }
    return std::sqrt(s);
}

EnergyReport verify_energy_estimates(const MembraneSystem& sys, const Nonlinearity& f,
                                     const SolverParams& p, const PeriodicOrbit& orbit,
                                     double lambda1, double lambda2) {
    if (!(lambda1 > 0.0) || lambda2 < 0.0) {
        throw std::invalid_argument("energy estimates need lambda1 > 0 and lambda2 >= 0");
    }
    const auto& w = orbit.orbit.jumps;
    const auto& t = orbit.orbit.times;
    const int n = static_cast<int>(w.size()) - 1;
    const double dt = orbit.orbit.dt;
    const double l = sys.length_scale();
    const double beta = p.alpha / l;
    const double as = sys.data_energy();
    const auto& mu = sys.weights();
    const double young = l * lambda2 * lambda2 * sys.total_weight() / (2.0 * lambda1);

    EnergyReport r;
    r.lambda1 = lambda1;
    r.lambda2 = lambda2;
    double bulk = 0.0;
    double data = 0.0;
    double data_rate = 0.0;
    double rate = 0.0;
    std::vector<double> psi(n + 1);
    for (int k = 0; k <= n; ++k) psi[k] = sys.boundary().temporal_value(t[k]);
    for (int k = 1; k <= n; ++k) {
        bulk += dt * 0.5 * sys.energy(w[k], psi[k]);
        r.gradient_lhs += dt * 0.5 * lambda1 / l * sys.weighted_dot(w[k], w[k]);
        data += dt * 0.5 * psi[k] * psi[k] * as;
        const double dpsi = (psi[k] - psi[k - 1]) / dt;
        data_rate += dt * 0.5 * dpsi * dpsi * as;
        const Eigen::VectorXd dw = (w[k] - w[k - 1]) / dt;
        rate += dt * sys.weighted_dot(dw, dw);
    }
    r.gradient_lhs += bulk;
    const double closure = 0.5 * beta * (sys.weighted_dot(w[0], w[0]) - sys.weighted_dot(w[n], w[n]));
    r.gradient_rhs = data + young + closure;

    double primitive_gap = 0.0;
    for (Eigen::Index i = 0; i < w[0].size(); ++i) {
        primitive_gap += mu[i] * (f.primitive(w[0][i] / l) - f.primitive(w[n][i] / l));
    }
    const double energy_gap = 0.5 * (sys.energy(w[0], psi[0]) - sys.energy(w[n], psi[n]));
    r.rate_lhs = 0.5 * beta * rate;
    r.rate_rhs = data_rate + r.gradient_rhs + l * primitive_gap + energy_gap;
    return r;
}

}  // namespace tissue
