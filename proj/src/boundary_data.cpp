#include "tissue/boundary_data.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace tissue {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double y_profile(const std::array<double, 2>& y) {
    return std::cos(kTwoPi * y[0]) + 2.0 * (y[0] - 0.5);
}

}  // namespace

double BoundaryData::spatial_value(const std::array<double, 2>& x, int dimension) const {
    switch (spatial) {
        case Spatial::kConstant:
            return amplitude;
        case Spatial::kAffine:
            return amplitude * x[0];
        case Spatial::kSines: {
            double v = std::sin(std::numbers::pi * (x[0] + 0.25));
            if (dimension == 2) v *= std::sin(std::numbers::pi * (x[1] + 0.25));
            return amplitude * v;
        }
    }
    return 0.0;
}

double BoundaryData::temporal_value(double t) const {
    // reduce to [0,1) so that psi_t(t+1) and psi_t(t) share the same argument
    const double tau = t - std::floor(t);
    switch (temporal) {
        case Temporal::kConstant:
            return 1.0;
        case Temporal::kSine:
            return std::sin(kTwoPi * tau);
        case Temporal::kOffsetSine:
            return offset + std::sin(kTwoPi * tau);
    }
    return 0.0;
}

BoundaryData::Spatial parse_spatial_profile(const std::string& name) {
    if (name == "constant") return BoundaryData::Spatial::kConstant;
    if (name == "affine") return BoundaryData::Spatial::kAffine;
    if (name == "sines") return BoundaryData::Spatial::kSines;
    throw std::invalid_argument("unknown spatial profile '" + name +
                                "' (expected constant, affine or sines)");
}

BoundaryData::Temporal parse_temporal_profile(const std::string& name) {
    if (name == "constant") return BoundaryData::Temporal::kConstant;
    if (name == "sine") return BoundaryData::Temporal::kSine;
    if (name == "offset_sine") return BoundaryData::Temporal::kOffsetSine;
    throw std::invalid_argument("unknown temporal profile '" + name +
                                "' (expected constant, sine or offset_sine)");
}

std::string to_string(BoundaryData::Spatial s) {
    switch (s) {
        case BoundaryData::Spatial::kConstant: return "constant";
        case BoundaryData::Spatial::kAffine: return "affine";
        case BoundaryData::Spatial::kSines: return "sines";
    }
    return "?";
}

std::string to_string(BoundaryData::Temporal t) {
    switch (t) {
        case BoundaryData::Temporal::kConstant: return "constant";
        case BoundaryData::Temporal::kSine: return "sine";
        case BoundaryData::Temporal::kOffsetSine: return "offset_sine";
    }
    return "?";
}

Eigen::VectorXd InitialJump::sample(const std::vector<std::array<double, 2>>& x,
                                    const std::vector<std::array<double, 2>>& y,
                                    const CellGeometry& cell) const {
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
    switch (kind) {
        case Kind::kZero:
            break;
        case Kind::kUniform:
            s.setConstant(amplitude);
            break;
        case Kind::kSmooth: {
            double mean = 0.0;
            for (const auto& f : cell.facets) mean += y_profile(f.midpoint);
            mean /= static_cast<double>(cell.facets.size());
            for (Eigen::Index i = 0; i < n; ++i) {
                s[i] = amplitude * (1.0 + x[i][0]) * (y_profile(y[i]) - mean);
            }
            break;
        }
        case Kind::kRandom: {
            std::mt19937_64 rng(seed);
            std::uniform_real_distribution<double> u(-amplitude, amplitude);
            for (Eigen::Index i = 0; i < n; ++i) s[i] = u(rng);
            break;
        }
    }
    return s;
}

InitialJump::Kind parse_initial_kind(const std::string& name) {
    if (name == "zero") return InitialJump::Kind::kZero;
    if (name == "uniform") return InitialJump::Kind::kUniform;
    if (name == "smooth") return InitialJump::Kind::kSmooth;
    if (name == "random") return InitialJump::Kind::kRandom;
    throw std::invalid_argument("unknown initial jump kind '" + name +
                                "' (expected zero, uniform, smooth or random)");
}

std::string to_string(InitialJump::Kind k) {
    switch (k) {
        case InitialJump::Kind::kZero: return "zero";
        case InitialJump::Kind::kUniform: return "uniform";
        case InitialJump::Kind::kSmooth: return "smooth";
        case InitialJump::Kind::kRandom: return "random";
    }
    return "?";
}

Eigen::VectorXd initial_jump_micro(const InitialJump& s, const EpsilonDomain& domain) {
    std::vector<std::array<double, 2>> x;
    std::vector<std::array<double, 2>> y;
    x.reserve(domain.facets.size());
    y.reserve(domain.facets.size());
    for (const auto& f : domain.facets) {
        x.push_back(f.midpoint);
        y.push_back(domain.local_coordinate(f.midpoint));
    }
    return domain.epsilon * s.sample(x, y, domain.cell);
}

}  // namespace tissue
