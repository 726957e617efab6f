#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tissue/membrane.hpp"

namespace tissue {

/// One period of a time-periodic jump trajectory: states at steps 0..N, N = 1/dt.
struct PeriodicOrbit {
    Trajectory orbit;
    double defect = 0.0;  // |w(1) - w(0)|_mu
    int iterations = 0;
    std::vector<double> defects;
    bool defect_monotone = true;
    double theta = 1.0;
    std::string method = "picard";
    std::optional<double> delta;

    const Eigen::VectorXd& start() const { return orbit.jumps.front(); }
    int steps() const { return static_cast<int>(orbit.jumps.size()) - 1; }
};

struct PicardOptions {
    double tol = 1e-8;
    int max_iters = 500;
    double theta = 1.0;
    int stall_window = 20;
};

/// Jump at t=1 of the trajectory started from w0 at t=0.
Eigen::VectorXd poincare_map(const MembraneSystem& sys, const Nonlinearity& f,
                             const SolverParams& p, const Eigen::VectorXd& w0);

/// Damped Picard iteration w <- (1-theta) w + theta P(w) on the jump.
PeriodicOrbit find_periodic(const MembraneSystem& sys, const Nonlinearity& f,
                            const SolverParams& p, const Eigen::VectorXd& w0,
                            const PicardOptions& opts = {});

struct RegularizedOrbits {
    std::vector<double> deltas;
    std::vector<PeriodicOrbit> orbits;
    std::vector<double> differences;  // between consecutive orbits
};

/// Orbits of f + delta s along a decreasing delta sequence, each warm-started from the
/// previous one.
RegularizedOrbits find_periodic_regularized(const MembraneSystem& sys, const Nonlinearity& f,
                                            const SolverParams& p,
                                            const std::vector<double>& deltas,
                                            const Eigen::VectorXd& w0,
                                            const PicardOptions& opts = {});

/// Period L2 distance sqrt(sum_n dt |wa^n - wb^n|_mu^2), n = 1..N.
double orbit_difference(const MembraneSystem& sys, const PeriodicOrbit& a, const PeriodicOrbit& b);

/// Discrete energy bounds over one period of an orbit.
///
///   gradient:  sum dt [a(u)/2 + lambda1/(2l) |w|^2] <= sum dt a(Psi)/2 + l lambda2^2 |Gamma|/(2 lambda1)
///   rate:      alpha/(2l) sum dt |dw/dt|^2 <= sum dt a(dPsi/dt)/2 + sum dt a(Psi)/2 + l lambda2^2 |Gamma|/(2 lambda1)
///
/// Both right-hand sides carry the (tiny) terms left by the finite periodicity defect.
struct EnergyReport {
    double gradient_lhs = 0.0;
    double gradient_rhs = 0.0;
    double rate_lhs = 0.0;
    double rate_rhs = 0.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double gradient_margin() const { return gradient_rhs - gradient_lhs; }
    double rate_margin() const { return rate_rhs - rate_lhs; }
    bool pass() const { return gradient_margin() >= 0.0 && rate_margin() >= 0.0; }
};

EnergyReport verify_energy_estimates(const MembraneSystem& sys, const Nonlinearity& f,
                                     const SolverParams& p, const PeriodicOrbit& orbit,
                                     double lambda1, double lambda2);

}  // namespace tissue
