#include "tissue/decay_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tissue/micro_solver.hpp"

namespace tissue {

RateFit fit_rate(const std::vector<double>& times, const std::vector<double>& values,
                 double window_fraction, double floor) {
    if (times.size() != values.size()) throw std::invalid_argument("series length mismatch");
    RateFit fit;
    const std::size_t n = values.size();
    const std::size_t first = n - std::max<std::size_t>(2, static_cast<std::size_t>(
                                                                std::ceil(window_fraction * n)));
    if (n < 2) {
        fit.classification = "subexponential";
        return fit;
    }
    for (std::size_t i = first; i < n; ++i) {
        if (!(values[i] > floor)) {
            fit.classification = "reached floor";
            return fit;
        }
    }
    double st = 0.0, sy = 0.0;
    const double m = static_cast<double>(n - first);
    for (std::size_t i = first; i < n; ++i) {
        st += times[i];
        sy += std::log(values[i]);
    }
    st /= m;
    sy /= m;
    double stt = 0.0, sty = 0.0, syy = 0.0;
    for (std::size_t i = first; i < n; ++i) {
        const double dt = times[i] - st;
        const double dy = std::log(values[i]) - sy;
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    fit.points = static_cast<int>(m);
    fit.rate = stt > 0.0 ? sty / stt : 0.0;
    fit.r2 = (syy > 0.0 && stt > 0.0) ? (sty * sty) / (stt * syy) : 0.0;
    fit.classification = fit.r2 >= 0.99 ? "exponential" : "subexponential";
    return fit;
}

std::vector<double> DecayReport::series(std::size_t k) const {
    std::vector<double> s;
    s.reserve(norms.size());
    for (const auto& row : norms) s.push_back(row[k]);
    return s;
}

int DecayReport::first_below(double factor) const {
    if (norms.empty()) return -1;
    for (std::size_t i = 0; i < norms.size(); ++i) {
        bool all = true;
        for (std::size_t k = 0; k < names.size(); ++k) {
            if (!(norms[i][k] <= factor * norms[0][k])) all = false;
        }
        if (all) return static_cast<int>(i);
    }
    return -1;
}

DecayReport decay_metrics(const MembraneSystem& sys, const Nonlinearity& f, const SolverParams& p,
                          const Trajectory& traj, const PeriodicOrbit& orbit) {
    const int period = orbit.steps();
    if (traj.dt != orbit.orbit.dt || period < 1) {
        throw std::invalid_argument("trajectory and orbit do not share the time grid");
    }
    if (!traj.jumps.empty() && traj.jumps.front().size() != orbit.start().size()) {
        throw std::invalid_argument("trajectory and orbit do not share the membrane grid");
    }
    const double l = sys.length_scale();
    DecayReport rep;
    rep.names = sys.norm_names();
    double emax = 0.0;
    for (std::size_t k = 0; k < traj.jumps.size(); ++k) {
        const double t = traj.times[k];
        const long step = std::lround(t / traj.dt);
        const auto& wo = orbit.orbit.jumps[static_cast<std::size_t>(step % period)];
        const Eigen::VectorXd& wt = traj.jumps[k];
        const Eigen::VectorXd r = wt - wo;
        rep.times.push_back(t);
        rep.norms.push_back(sys.norms(r, 0.0));
        const double e = p.alpha / l * sys.weighted_dot(r, r);
        if (!rep.lyapunov.empty()) {
            const double inc = e - rep.lyapunov.back();
            rep.max_lyapunov_increase = std::max(rep.max_lyapunov_increase, inc);
            if (inc > 1e-10) rep.lyapunov_monotone = false;
        }
        rep.lyapunov.push_back(e);
        emax = std::max(emax, e);
        double gmin = std::numeric_limits<double>::infinity();
        double gmax = -gmin;
        for (Eigen::Index i = 0; i < r.size(); ++i) {
            const double d = r[i] / l;
            if (std::abs(d) <= 1e-14 * std::max(1.0, std::abs(wt[i] / l))) continue;
            const double g = (f(wt[i] / l) - f(wo[i] / l)) / d;
            gmin = std::min(gmin, g);
            gmax = std::max(gmax, g);
        }
        rep.secant_min.push_back(std::isfinite(gmin) ? gmin : 0.0);
        rep.secant_max.push_back(std::isfinite(gmax) ? gmax : 0.0);
    }
    rep.rate = fit_rate(rep.times, rep.lyapunov, 0.4, 1e-24 * emax);
    return rep;
}

std::vector<double> lyapunov_series(const MembraneSystem& sys, const SolverParams& p,
                                    const Trajectory& a, const Trajectory& b) {
    if (a.jumps.size() != b.jumps.size() || a.dt != b.dt || a.stride != b.stride) {
        throw std::invalid_argument("trajectories do not share the sampling");
    }
    std::vector<double> e;
    e.reserve(a.jumps.size());
    for (std::size_t k = 0; k < a.jumps.size(); ++k) e.push_back(lyapunov_value(sys, p, a.jumps[k], b.jumps[k]));
    return e;
}

DecayInvariants check_decay_invariants(const MicroSystem& sys, const DecayReport& report,
                                       double eta) {
    DecayInvariants inv;
    inv.stability_constant = sys.stability_constant();
    inv.poincare_constant = sys.poincare_constant();
    const std::size_t n = report.norms.size();
    // sup of the jump norm over [t-1, end)
    std::vector<double> suffix(n + 1, 0.0);
    for (std::size_t i = n; i-- > 0;) suffix[i] = std::max(suffix[i + 1], report.norms[i][2]);
    std::size_t lo = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (report.times[lo] < report.times[i] - 1.0) ++lo;
        const double bound = inv.stability_constant * suffix[lo] + eta;
        inv.worst_gradient_ratio = std::max(inv.worst_gradient_ratio, report.norms[i][1] / bound);
        const double pb = inv.poincare_constant * (report.norms[i][1] + report.norms[i][2]) + eta;
        inv.worst_poincare_ratio = std::max(inv.worst_poincare_ratio, report.norms[i][0] / pb);
    }
    return inv;
}

}  // namespace tissue
