#pragma once

#include <array>
#include <optional>
#include <string>

namespace tissue {

/// Sampled validity record of the structural assumptions on the membrane function.
struct Certificate {
    bool monotone = false;           // f' >= 0 and strictly increasing on the samples
    bool f0_zero = false;            // f(0) == 0 exactly
    std::optional<double> delta0;    // f' >= delta0 for |s| >= threshold
    double delta0_threshold = 0.0;   // empirically smallest such threshold
    double lambda1 = 0.0;            // f(s)s >= lambda1 s^2 - lambda2 |s|
    double lambda2 = 0.0;
    std::optional<double> coercive;  // kappa with f' >= kappa on all of R (analytic)
    double sample_range = 0.0;       // S_max
    int samples = 0;
};

struct GrowthConstants {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
};

/// Membrane function f(s) = c0 s + c1 tanh(s) + c2 sin(s) + c3 s^3.
///
/// The four-term basis covers every built-in (linear, coercive tanh, noncoercive s+sin s,
/// cubic) and their affine combinations; all members are odd with f(0)=0.
class Nonlinearity {
public:
    enum Basis { kIdentity = 0, kTanh = 1, kSine = 2, kCube = 3 };
    static constexpr int kBasisCount = 4;

    /// Checks the assumptions on [-sample_range, sample_range] and throws
    /// NonlinearityError if f is not strictly monotone.
    Nonlinearity(std::string name, std::array<double, kBasisCount> coefficients,
                 double sample_range = 50.0, int samples = 10'000);

    double operator()(double s) const;
    double derivative(double s) const;
    /// Primitive F with F(0)=0.
    double primitive(double s) const;

    const std::string& name() const { return name_; }
    const std::array<double, kBasisCount>& coefficients() const { return coeff_; }
    const Certificate& certificate() const { return cert_; }
    /// Coefficient of the linear part when f is exactly linear.
    std::optional<double> linear_slope() const;

private:
    std::string name_;
    std::array<double, kBasisCount> coeff_{};
    Certificate cert_;
};

/// Built-ins by name: "linear" (kappa s), "tanh" (kappa s + tanh s), "sine" (s + sin s),
/// "cubic" (s^3 + s).
Nonlinearity make_nonlinearity(const std::string& kind, double kappa = 1.0,
                               double sample_range = 50.0, int samples = 10'000);

/// f_delta(s) = f(s) + delta s.
Nonlinearity regularize(const Nonlinearity& f, double delta);

/// Growth constants on a sample grid of [-s_max, s_max].
///
/// lambda2 is kept at zero whenever f(s)/s stays positive on the samples, and lambda1 is then
/// the largest slope compatible with that choice (min of f(s)/s). When f(s)/s degenerates
/// near the origin, lambda1 is the smallest secant slope on the outer half of the range and
/// lambda2 the smallest value making the bound hold at every sample.
GrowthConstants fit_growth_constants(const Nonlinearity& f, double s_max, int samples = 10'000);

}  // namespace tissue
