#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tissue/geometry.hpp"

namespace tissue {

/// Separable Dirichlet data Psi(x,t) = amplitude * psi_s(x) * psi_t(t), psi_t 1-periodic.
struct BoundaryData {
    enum class Spatial { kConstant, kAffine, kSines };
    enum class Temporal { kConstant, kSine, kOffsetSine };

    Spatial spatial = Spatial::kSines;
    Temporal temporal = Temporal::kSine;
    double amplitude = 1.0;
    double offset = 0.5;  // c0 of the offset sine

    /// amplitude * psi_s(x)
    double spatial_value(const std::array<double, 2>& x, int dimension) const;
    double temporal_value(double t) const;
    double value(const std::array<double, 2>& x, int dimension, double t) const {
        return spatial_value(x, dimension) * temporal_value(t);
    }
    bool spatially_constant() const { return spatial == Spatial::kConstant; }
    bool identically_zero() const { return amplitude == 0.0; }
};

BoundaryData::Spatial parse_spatial_profile(const std::string& name);
BoundaryData::Temporal parse_temporal_profile(const std::string& name);
std::string to_string(BoundaryData::Spatial s);
std::string to_string(BoundaryData::Temporal t);

/// Initial membrane jump S(x,y); the micro solver uses S_eps(x) = eps * S(x, x/eps).
struct InitialJump {
    enum class Kind { kZero, kUniform, kSmooth, kRandom };

    Kind kind = Kind::kSmooth;
    double amplitude = 1.0;
    std::uint64_t seed = 1;

    /// S at the facet points (x global, y local to the unit cell). `cell` supplies the
    /// facet set used to center the y-profile of the smooth kind.
    Eigen::VectorXd sample(const std::vector<std::array<double, 2>>& x,
                           const std::vector<std::array<double, 2>>& y,
                           const CellGeometry& cell) const;
};

InitialJump::Kind parse_initial_kind(const std::string& name);
std::string to_string(InitialJump::Kind k);

/// S_eps on the facets of the tiled domain.
Eigen::VectorXd initial_jump_micro(const InitialJump& s, const EpsilonDomain& domain);

}  // namespace tissue
