#include "tissue/membrane.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <spdlog/spdlog.h>

#include "tissue/errors.hpp"

namespace tissue {

namespace {

double sup_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

Eigen::VectorXd apply_f(const Nonlinearity& f, const Eigen::VectorXd& w, double scale) {
    Eigen::VectorXd out(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) out[i] = f(w[i] / scale);
    return out;
}

// Preconditioned CG for (diag + S) x = b in the mu inner product, where mu*S is symmetric.
Eigen::VectorXd solve_jacobian(const MembraneSystem& sys, const Eigen::VectorXd& diag,
                               const Eigen::VectorXd& b, const SolverParams& p) {
    const Eigen::VectorXd precond = (diag + sys.schur_diagonal()).cwiseInverse();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
    Eigen::VectorXd r = b;
    const double bnorm = sys.weighted_norm(b);
    if (bnorm == 0.0) return x;
    Eigen::VectorXd z = precond.cwiseProduct(r);
    Eigen::VectorXd d = z;
    Eigen::VectorXd Ad(b.size());
    double rz = sys.weighted_dot(r, z);
    std::vector<double> history;
    for (int it = 0; it < p.linear_max_iters; ++it) {
        sys.apply_schur(d, Ad);
        Ad += diag.cwiseProduct(d);
        const double a = rz / sys.weighted_dot(d, Ad);
        x += a * d;
        r -= a * Ad;
        const double rnorm = sys.weighted_norm(r);
        history.push_back(rnorm / bnorm);
        if (rnorm <= p.linear_tol * bnorm) return x;
        z = precond.cwiseProduct(r);
        const double rz_new = sys.weighted_dot(r, z);
        d = z + (rz_new / rz) * d;
        rz = rz_new;
    }
    // CG stalls at round-off slightly above a very strict tolerance; accept that.
    if (!history.empty() && history.back() <= 1e3 * p.linear_tol) return x;
    throw SolverError("membrane linear solve did not converge", std::move(history));
}

struct NewtonOutcome {
    bool converged = false;
    Eigen::VectorXd w;
    int iterations = 0;
    std::vector<double> residuals;
};

NewtonOutcome newton(const MembraneSystem& sys, const Nonlinearity& f, const SolverParams& p,
                     const Eigen::VectorXd& w_old, double t_new, double shift) {
    const double l = sys.length_scale();
    const double c = p.alpha / l / p.dt;
    const double psi = sys.boundary().temporal_value(t_new);

    const double scale = std::max({c * sup_norm(w_old), std::abs(psi) * sup_norm(sys.forcing_shape()),
                                   sup_norm(apply_f(f, w_old, l)),
                                   std::numeric_limits<double>::min()});
    const double tol = p.newton_tol * scale;

    NewtonOutcome out;
    out.w = w_old;
    Eigen::VectorXd g = step_residual(sys, f, p, w_old, out.w, t_new);
    double gsup = sup_norm(g);
    out.residuals.push_back(gsup);
    Eigen::VectorXd diag(w_old.size());
    for (int it = 0; it < p.newton_max_iters; ++it) {
        if (gsup <= tol) {
            out.converged = true;
            return out;
        }
        for (Eigen::Index i = 0; i < diag.size(); ++i) {
            diag[i] = c + (f.derivative(out.w[i] / l) + shift) / l;
        }
        const Eigen::VectorXd d = solve_jacobian(sys, diag, -g, p);
        const double merit = sys.weighted_norm(g);
        double lambda = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 30; ++ls) {
            const Eigen::VectorXd trial = out.w + lambda * d;
            Eigen::VectorXd gt = step_residual(sys, f, p, w_old, trial, t_new);
            const double gt_sup = sup_norm(gt);
            if (sys.weighted_norm(gt) <= (1.0 - 1e-4 * lambda) * merit || gt_sup <= tol) {
                out.w = trial;
                g = std::move(gt);
                gsup = gt_sup;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        out.iterations = it + 1;
        out.residuals.push_back(gsup);
        if (!accepted) return out;
    }
    out.converged = gsup <= tol;
    return out;
}

}  // namespace

void SolverParams::validate() const {
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
    if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
    if (!(newton_tol > 0.0) || !(linear_tol > 0.0)) {
        throw std::invalid_argument("solver tolerances must be positive");
    }
    if (newton_max_iters < 1 || linear_max_iters < 1) {
        throw std::invalid_argument("iteration limits must be at least 1");
    }
    if (!(delta_shift > 0.0)) throw std::invalid_argument("delta_shift must be positive");
}

int SolverParams::steps_per_period() const {
    const double n = 1.0 / dt;
    const long r = std::lround(n);
    if (r < 1 || std::abs(n - static_cast<double>(r)) > 1e-9 * n) {
        std::ostringstream os;
        os << "time step " << dt << " does not divide the unit period";
        throw std::invalid_argument(os.str());
    }
    return static_cast<int>(r);
}

Eigen::VectorXd step_residual(const MembraneSystem& sys, const Nonlinearity& f,
                              const SolverParams& p, const Eigen::VectorXd& w_old,
                              const Eigen::VectorXd& w, double t_new) {
    const double l = sys.length_scale();
    const double c = p.alpha / l / p.dt;
    Eigen::VectorXd g(w.size());
    sys.apply_schur(w, g);
    const double psi = sys.boundary().temporal_value(t_new);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        g[i] += c * (w[i] - w_old[i]) + f(w[i] / l) - psi * sys.forcing_shape()[i];
    }
    return g;
}

StepResult step(const MembraneSystem& sys, const Nonlinearity& f, const SolverParams& p,
                const Eigen::VectorXd& w_old, double t_new) {
    auto first = newton(sys, f, p, w_old, t_new, 0.0);
    StepResult res;
    if (first.converged) {
        res.w = std::move(first.w);
        res.iterations = first.iterations;
        res.residuals = std::move(first.residuals);
        return res;
    }
    spdlog::debug("Newton stagnated at t={} after {} iterations; retrying with shift {}", t_new,
                  first.iterations, p.delta_shift);
    auto second = newton(sys, f, p, w_old, t_new, p.delta_shift);
    std::vector<double> history = std::move(first.residuals);
    history.insert(history.end(), second.residuals.begin(), second.residuals.end());
    if (!second.converged) {
        std::ostringstream os;
        os << "Newton failed at t=" << t_new << " (residual " << history.back() << ")";
        throw SolverError(os.str(), std::move(history));
    }
    res.w = std::move(second.w);
    res.iterations = first.iterations + second.iterations;
    res.shifted = true;
    res.residuals = std::move(history);
    return res;
}

double energy_balance_residual(const MembraneSystem& sys, const Nonlinearity& f,
                               const SolverParams& p, const Eigen::VectorXd& w0,
                               const Eigen::VectorXd& w1, double t1) {
    const double l = sys.length_scale();
    const double beta = p.alpha / l;
    Eigen::VectorXd q(w1.size());
    sys.apply_schur(w1, q);
    q = sys.boundary().temporal_value(t1) * sys.forcing_shape() - q;
    const Eigen::VectorXd dw = w1 - w0;
    double fw = 0.0;
    const auto& mu = sys.weights();
    for (Eigen::Index i = 0; i < w1.size(); ++i) fw += mu[i] * f(w1[i] / l) * w1[i];
    return 0.5 * beta * (sys.weighted_dot(w1, w1) - sys.weighted_dot(w0, w0) + sys.weighted_dot(dw, dw)) +
           p.dt * fw - p.dt * sys.weighted_dot(q, w1);
}

Trajectory simulate(const MembraneSystem& sys, const Nonlinearity& f, const SolverParams& p,
                    const Eigen::VectorXd& w0, int steps, int stride, double t0,
                    const StepObserver& observer) {
    if (stride < 1) throw std::invalid_argument("sample stride must be at least 1");
    if (w0.size() != sys.size()) throw std::invalid_argument("initial jump has the wrong size");
    Trajectory traj;
    traj.dt = p.dt;
    traj.stride = stride;
    traj.t0 = t0;
    traj.times.push_back(t0);
    traj.jumps.push_back(w0);
    traj.newton_iters.push_back(0);
    traj.energy_residual.push_back(0.0);
    Eigen::VectorXd w = w0;
    for (int n = 0; n < steps; ++n) {
        const double t_new = t0 + (n + 1) * p.dt;
        StepResult r = step(sys, f, p, w, t_new);
        traj.max_newton_iters = std::max(traj.max_newton_iters, r.iterations);
        if (r.shifted) ++traj.shifted_steps;
        if (observer) observer(n, w, r);
        if ((n + 1) % stride == 0) {
            traj.times.push_back(t_new);
            traj.newton_iters.push_back(r.iterations);
            traj.energy_residual.push_back(energy_balance_residual(sys, f, p, w, r.w, t_new));
            traj.jumps.push_back(r.w);
        }
        w = std::move(r.w);
    }
    traj.total_steps = steps;
    return traj;
}

DissipationTerms dissipation_identity(const MembraneSystem& sys, const Nonlinearity& f,
                                      const SolverParams& p, const Eigen::VectorXd& wA0,
                                      const Eigen::VectorXd& wB0, const Eigen::VectorXd& wA1,
                                      const Eigen::VectorXd& wB1) {
    const double l = sys.length_scale();
    const Eigen::VectorXd r0 = wA0 - wB0;
    const Eigen::VectorXd r1 = wA1 - wB1;
    DissipationTerms d;
    Eigen::VectorXd sr(r1.size());
    sys.apply_schur(r1, sr);
    d.bulk_term = p.dt * sys.weighted_dot(sr, r1);
    d.membrane_storage_delta = 0.5 * p.alpha / l * (sys.weighted_dot(r1, r1) - sys.weighted_dot(r0, r0));
    const auto& mu = sys.weights();
    double diss = 0.0;
    for (Eigen::Index i = 0; i < r1.size(); ++i) {
        diss += mu[i] * (f(wA1[i] / l) - f(wB1[i] / l)) * r1[i];
    }
    d.membrane_dissipation = p.dt * diss;
    return d;
}

double lyapunov_value(const MembraneSystem& sys, const SolverParams& p, const Eigen::VectorXd& wA,
                      const Eigen::VectorXd& wB) {
    const Eigen::VectorXd r = wA - wB;
    return p.alpha / sys.length_scale() * sys.weighted_dot(r, r);
}

}  // namespace tissue
