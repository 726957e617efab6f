#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tissue/boundary_data.hpp"
#include "tissue/nonlinearity.hpp"

namespace tissue {

/// Jump dynamics after eliminating the quasi-static bulk:
///
///   (alpha/l) dw/dt + f(w/l) = q,   q = psi_t(t) q0 - S w,
///
/// with l the length scale (eps for the micro problem, 1 for the two-scale limit) and
/// facet weights mu such that mu*S is symmetric positive semidefinite.
class MembraneSystem {
public:
    virtual ~MembraneSystem() = default;

    virtual int size() const = 0;
    virtual const Eigen::VectorXd& weights() const = 0;
    virtual double length_scale() const = 0;
    virtual const BoundaryData& boundary() const = 0;
    /// out = S w
    virtual void apply_schur(const Eigen::VectorXd& w, Eigen::VectorXd& out) const = 0;
    virtual const Eigen::VectorXd& schur_diagonal() const = 0;
    /// q0 at psi_t = 1.
    virtual const Eigen::VectorXd& forcing_shape() const = 0;

    /// Names and values of the state norms for jump w with data scaled by psi_t.
    virtual std::vector<std::string> norm_names() const = 0;
    virtual std::vector<double> norms(const Eigen::VectorXd& w, double psi_t) const = 0;
    /// Bulk energy a(u,u) of the state with jump w and data scaled by psi_t.
    virtual double energy(const Eigen::VectorXd& w, double psi_t) const = 0;
    /// Energy of the jump-free interpolant of the data at psi_t = 1.
    virtual double data_energy() const = 0;

    double weighted_dot(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
        return (weights().array() * a.array() * b.array()).sum();
    }
    double weighted_norm(const Eigen::VectorXd& a) const { return std::sqrt(weighted_dot(a, a)); }
    double total_weight() const { return weights().sum(); }
};

struct SolverParams {
    double alpha = 1.0;
    double dt = 1e-3;
    double newton_tol = 1e-12;
    int newton_max_iters = 50;
    double linear_tol = 1e-14;
    int linear_max_iters = 1000;
    double delta_shift = 1e-2;  // Jacobian shift of the fallback retry, scaled by 1/l

    void validate() const;
    /// Number of steps per unit period; throws if 1/dt is not an integer.
    int steps_per_period() const;
};

struct StepResult {
    Eigen::VectorXd w;
    int iterations = 0;
    bool shifted = false;
    std::vector<double> residuals;  // sup-norm residual per Newton iterate
};

/// One backward Euler step from w_old at t_new - dt to t_new.
StepResult step(const MembraneSystem& sys, const Nonlinearity& f, const SolverParams& p,
                const Eigen::VectorXd& w_old, double t_new);

/// Backward Euler step residual G(w) (used by diagnostics and tests).
Eigen::VectorXd step_residual(const MembraneSystem& sys, const Nonlinearity& f,
                              const SolverParams& p, const Eigen::VectorXd& w_old,
                              const Eigen::VectorXd& w, double t_new);

/// Sampled jump trajectory. Sample k holds the state after step k*stride.
struct Trajectory {
    double dt = 0.0;
    int stride = 1;
    double t0 = 0.0;
    std::vector<double> times;
    std::vector<Eigen::VectorXd> jumps;
    std::vector<int> newton_iters;          // per sample: iterations of the step that produced it
    std::vector<double> energy_residual;    // per sample: single-trajectory balance residual
    int total_steps = 0;
    int max_newton_iters = 0;
    int shifted_steps = 0;
};

using StepObserver = std::function<void(int step_index, const Eigen::VectorXd& w_old,
                                        const StepResult& result)>;

/// Advances `steps` steps from w0 at time t0, recording every `stride`-th state.
Trajectory simulate(const MembraneSystem& sys, const Nonlinearity& f, const SolverParams& p,
                    const Eigen::VectorXd& w0, int steps, int stride = 1, double t0 = 0.0,
                    const StepObserver& observer = {});

/// Single-trajectory energy balance of one step, which vanishes for an exact solve:
///   (beta/2)(|w1|^2 - |w0|^2 + |w1-w0|^2) + dt <f(w1/l), w1> - dt <q1, w1>.
double energy_balance_residual(const MembraneSystem& sys, const Nonlinearity& f,
                               const SolverParams& p, const Eigen::VectorXd& w0,
                               const Eigen::VectorXd& w1, double t1);

/// Discrete dissipation identity for the difference r = wA - wB of two solutions.
struct DissipationTerms {
    double bulk_term = 0.0;               // dt <S r1, r1>_mu = dt a(r1)
    double membrane_storage_delta = 0.0;  // (beta/2)(|r1|^2 - |r0|^2)
    double membrane_dissipation = 0.0;    // dt <f(wA1/l) - f(wB1/l), r1>_mu
    double sum() const { return bulk_term + membrane_storage_delta + membrane_dissipation; }
};

DissipationTerms dissipation_identity(const MembraneSystem& sys, const Nonlinearity& f,
                                      const SolverParams& p, const Eigen::VectorXd& wA0,
                                      const Eigen::VectorXd& wB0, const Eigen::VectorXd& wA1,
                                      const Eigen::VectorXd& wB1);

/// E = (alpha/l) |r|_mu^2.
double lyapunov_value(const MembraneSystem& sys, const SolverParams& p, const Eigen::VectorXd& wA,
                      const Eigen::VectorXd& wB);

}  // namespace tissue
