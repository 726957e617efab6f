#pragma once

#include <string>
#include <vector>

#include "tissue/membrane.hpp"
#include "tissue/periodic_solver.hpp"

namespace tissue {

class MicroSystem;

struct RateFit {
    double rate = 0.0;  // least-squares slope of log E per unit time
    double r2 = 0.0;
    std::string classification;  // exponential | subexponential | reached floor
    int points = 0;
};

/// Fits log(values) against times over the trailing `window_fraction` of the series.
/// Values at or below `floor` inside the window classify the series as "reached floor".
RateFit fit_rate(const std::vector<double>& times, const std::vector<double>& values,
                 double window_fraction = 0.4, double floor = 0.0);

/// Distance between a trajectory and a periodic orbit, sample by sample.
struct DecayReport {
    std::vector<std::string> names;
    std::vector<double> times;
    std::vector<std::vector<double>> norms;  // [sample][norm]
    std::vector<double> lyapunov;            // (alpha/l) |r|_mu^2
    std::vector<double> secant_min;          // g = (f(a)-f(b))/(a-b) over facets
    std::vector<double> secant_max;
    bool lyapunov_monotone = true;
    double max_lyapunov_increase = 0.0;
    RateFit rate;

    std::vector<double> series(std::size_t k) const;
    /// First sample index at which every norm is below `factor` times its initial value,
    /// or -1 if never.
    int first_below(double factor) const;
};

DecayReport decay_metrics(const MembraneSystem& sys, const Nonlinearity& f, const SolverParams& p,
                          const Trajectory& traj, const PeriodicOrbit& orbit);

/// E(t) = (alpha/l) |wA - wB|_mu^2 at the shared samples.
std::vector<double> lyapunov_series(const MembraneSystem& sys, const SolverParams& p,
                                    const Trajectory& a, const Trajectory& b);

/// Structural checks of a micro decay report: gradient bounded by the jump through the
/// elliptic stability constant, bulk L2 bounded through the measured Poincare constant.
struct DecayInvariants {
    double stability_constant = 0.0;
    double poincare_constant = 0.0;
    double worst_gradient_ratio = 0.0;  // grad / (C sup jump + eta), must be <= 1
    double worst_poincare_ratio = 0.0;  // L2 / (C_P (grad + jump) + eta), must be <= 1
    bool pass() const { return worst_gradient_ratio <= 1.0 && worst_poincare_ratio <= 1.0; }
};

DecayInvariants check_decay_invariants(const MicroSystem& sys, const DecayReport& report,
                                       double eta = 1e-12);

}  // namespace tissue
