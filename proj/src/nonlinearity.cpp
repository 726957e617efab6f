#include "tissue/nonlinearity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "tissue/errors.hpp"

namespace tissue {

namespace {

constexpr double kDelta0Floor = 1e-3;

std::vector<double> sample_grid(double s_max, int samples) {
    std::vector<double> s(samples);
    for (int i = 0; i < samples; ++i) {
        s[i] = -s_max + 2.0 * s_max * i / (samples - 1);
    }
    return s;
}

// Analytic lower bound of f' over R from the basis bounds; -inf if unbounded below.
double derivative_lower_bound(const std::array<double, Nonlinearity::kBasisCount>& c) {
    // inf / sup of each basis derivative over R
    constexpr std::array<double, 4> lo{1.0, 0.0, -1.0, 0.0};
    constexpr std::array<double, 4> hi{1.0, 1.0, 1.0, std::numeric_limits<double>::infinity()};
    double bound = 0.0;
    for (int i = 0; i < Nonlinearity::kBasisCount; ++i) {
        if (c[i] == 0.0) continue;
        bound += c[i] > 0.0 ? c[i] * lo[i] : c[i] * hi[i];
    }
    return bound;
}

}  // namespace

Nonlinearity::Nonlinearity(std::string name, std::array<double, kBasisCount> coefficients,
                           double sample_range, int samples)
    : name_(std::move(name)), coeff_(coefficients) {
    if (!(sample_range > 0.0) || samples < 3) {
        throw NonlinearityError("sample range must be positive with at least 3 samples");
    }
    cert_.sample_range = sample_range;
    cert_.samples = samples;
    cert_.f0_zero = (*this)(0.0) == 0.0;

    const auto s = sample_grid(sample_range, samples);
    bool monotone = true;
    double prev = (*this)(s[0]);
    for (int i = 0; i < samples; ++i) {
        if (derivative(s[i]) < 0.0) monotone = false;
        if (i > 0) {
            const double cur = (*this)(s[i]);
            if (!(cur > prev)) monotone = false;
            prev = cur;
        }
    }
    cert_.monotone = monotone;
    if (!monotone) {
        throw NonlinearityError("membrane function '" + name_ +
                                "' is not strictly increasing on the sample range");
    }
    if (!cert_.f0_zero) {
        throw NonlinearityError("membrane function '" + name_ + "' does not vanish at 0");
    }

    const double kappa = derivative_lower_bound(coeff_);
    if (kappa > 0.0) cert_.coercive = kappa;

    // delta0: walk inward from the ends of the range keeping the running min of f' over
    // the tail |s| >= threshold; the tail must cover at least a quarter of the range.
    {
        const int half = samples / 2;
        double running = std::numeric_limits<double>::infinity();
        std::optional<double> best;
        double best_threshold = 0.0;
        for (int k = 0; k <= half; ++k) {
            const int lo = k;
            const int hi = samples - 1 - k;
            if (lo > hi) break;
            running = std::min({running, derivative(s[lo]), derivative(s[hi])});
            const double threshold = std::abs(s[lo]);
            if (running >= kDelta0Floor && sample_range - threshold >= 0.25 * sample_range) {
                best = running;
                best_threshold = threshold;
            }
            if (running < kDelta0Floor) break;
        }
        if (best) {
            cert_.delta0 = best;
            cert_.delta0_threshold = best_threshold;
        }
    }

    const auto growth = fit_growth_constants(*this, sample_range, samples);
    cert_.lambda1 = growth.lambda1;
    cert_.lambda2 = growth.lambda2;
}

double Nonlinearity::operator()(double s) const {
    double v = coeff_[kIdentity] * s;
    if (coeff_[kTanh] != 0.0) v += coeff_[kTanh] * std::tanh(s);
    if (coeff_[kSine] != 0.0) v += coeff_[kSine] * std::sin(s);
    if (coeff_[kCube] != 0.0) v += coeff_[kCube] * s * s * s;
    return v;
}

double Nonlinearity::derivative(double s) const {
    double v = coeff_[kIdentity];
    if (coeff_[kTanh] != 0.0) {
        const double th = std::tanh(s);
        v += coeff_[kTanh] * (1.0 - th * th);
    }
    if (coeff_[kSine] != 0.0) v += coeff_[kSine] * std::cos(s);
    if (coeff_[kCube] != 0.0) v += 3.0 * coeff_[kCube] * s * s;
    return v;
}

double Nonlinearity::primitive(double s) const {
    double v = 0.5 * coeff_[kIdentity] * s * s;
    if (coeff_[kTanh] != 0.0) {
        // log cosh s without overflow
        const double a = std::abs(s);
        v += coeff_[kTanh] * (a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0));
    }
    if (coeff_[kSine] != 0.0) v += coeff_[kSine] * (1.0 - std::cos(s));
    if (coeff_[kCube] != 0.0) v += 0.25 * coeff_[kCube] * s * s * s * s;
    return v;
}

std::optional<double> Nonlinearity::linear_slope() const {
    if (coeff_[kTanh] == 0.0 && coeff_[kSine] == 0.0 && coeff_[kCube] == 0.0) {
        return coeff_[kIdentity];
    }
    return std::nullopt;
}

Nonlinearity make_nonlinearity(const std::string& kind, double kappa, double sample_range,
                               int samples) {
    if (!(kappa > 0.0)) {
        throw NonlinearityError("kappa must be positive, got " + std::to_string(kappa));
    }
    std::ostringstream name;
    if (kind == "linear") {
        name << "linear kappa=" << kappa;
        return Nonlinearity(name.str(), {kappa, 0.0, 0.0, 0.0}, sample_range, samples);
    }
    if (kind == "tanh") {
        name << "tanh kappa=" << kappa;
        return Nonlinearity(name.str(), {kappa, 1.0, 0.0, 0.0}, sample_range, samples);
    }
    if (kind == "sine") {
        return Nonlinearity("s+sin s", {1.0, 0.0, 1.0, 0.0}, sample_range, samples);
    }
    if (kind == "cubic") {
        return Nonlinearity("s^3+s", {1.0, 0.0, 0.0, 1.0}, sample_range, samples);
    }
    throw NonlinearityError("unknown membrane function kind '" + kind +
                            "' (expected linear, tanh, sine or cubic)");
}

Nonlinearity regularize(const Nonlinearity& f, double delta) {
    if (!(delta > 0.0)) {
        throw NonlinearityError("regularization delta must be positive");
    }
    auto c = f.coefficients();
    c[Nonlinearity::kIdentity] += delta;
    std::ostringstream name;
    name << f.name() << " +" << delta << "s";
    return Nonlinearity(name.str(), c, f.certificate().sample_range, f.certificate().samples);
}

GrowthConstants fit_growth_constants(const Nonlinearity& f, double s_max, int samples) {
    const auto s = sample_grid(s_max, samples);
    constexpr double kDegenerate = 1e-8;

    // f(s)/s -> f'(0) at the origin
    double min_ratio = f.derivative(0.0);
    for (double x : s) {
        if (x == 0.0) continue;
        min_ratio = std::min(min_ratio, f(x) / x);
    }

    GrowthConstants g;
    if (min_ratio > kDegenerate) {
        g.lambda1 = min_ratio;
    } else {
        double tail = std::numeric_limits<double>::infinity();
        for (double x : s) {
            if (std::abs(x) >= 0.5 * s_max) tail = std::min(tail, f(x) / x);
        }
        g.lambda1 = tail;
    }
    if (!(g.lambda1 > kDegenerate)) {
        throw NonlinearityError("no feasible (lambda1, lambda2) for '" + f.name() +
                                "' on the sample range: f(s)s does not grow quadratically");
    }
    double need = 0.0;
    for (double x : s) {
        if (x == 0.0) continue;
        need = std::max(need, (g.lambda1 * x * x - f(x) * x) / std::abs(x));
    }
    g.lambda2 = need;
    return g;
}

}  // namespace tissue
