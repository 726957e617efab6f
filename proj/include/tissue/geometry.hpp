#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace tissue {

/// Uniform cell-centered grid on (0,L)^N with n cells per axis, N in {1,2}.
struct Grid {
    int dimension = 2;
    int n = 0;
    double h = 0.0;

    int cell_count() const { return dimension == 1 ? n : n * n; }
    int index(int i, int j = 0) const { return i + n * j; }
    std::array<int, 2> multi_index(int c) const { return {c % n, dimension == 1 ? 0 : c / n}; }
    std::array<double, 2> center(int c) const {
        const auto ij = multi_index(c);
        return {(ij[0] + 0.5) * h, dimension == 1 ? 0.0 : (ij[1] + 0.5) * h};
    }
    /// Measure of one face: h^(N-1).
    double face_measure() const { return dimension == 1 ? 1.0 : h; }
    /// Measure of one control volume: h^N.
    double cell_volume() const { return dimension == 1 ? h : h * h; }
};

/// One membrane facet: the face between an inner-phase and an outer-phase control volume.
/// The unit normal is sign * e_axis and points from the inner cell into the outer cell.
struct Facet {
    int inner = 0;
    int outer = 0;
    int axis = 0;
    int sign = 1;
    std::array<double, 2> midpoint{0.0, 0.0};
};

/// Periodic unit cell Y=(0,1)^N with the square inclusion (a,1-a)^N on an m^N grid.
struct CellGeometry {
    int dimension = 2;
    double margin = 0.25;
    int resolution = 8;
    int inclusion_begin = 0;  // first inner grid index per axis
    int inclusion_end = 0;    // one past the last inner grid index
    double inner_measure = 0.0;
    double outer_measure = 0.0;
    double membrane_measure = 0.0;
    Grid grid;
    std::vector<std::uint8_t> inner;  // phase flag per grid cell
    std::vector<Facet> facets;        // facets of Gamma inside Y

    bool diagnostic_only() const { return dimension == 1; }
    bool is_inner_local(int i) const { return i >= inclusion_begin && i < inclusion_end; }
};

CellGeometry build_cell_geometry(double margin, int resolution, int dimension = 2);

/// Conductivities of the two phases.
struct Conductivity {
    double inner = 1.0;
    double outer = 1.0;

    double of(bool is_inner) const { return is_inner ? inner : outer; }
    /// Series resistance across a membrane face with half-cells of width h/2 on both sides.
    double membrane_resistance(double h) const { return 0.5 * h * (1.0 / inner + 1.0 / outer); }
    double min() const { return inner < outer ? inner : outer; }
};

double mean_conductivity(const CellGeometry& cell, double sigma_inner, double sigma_outer);

/// The epsilon-tiled domain Omega=(0,1)^N with membrane facets of Gamma^eps.
struct EpsilonDomain {
    CellGeometry cell;
    double epsilon = 0.25;
    int tiles_per_axis = 4;  // 1/eps
    Grid grid;               // global grid, m/eps cells per axis
    std::vector<std::uint8_t> inner;
    std::vector<Facet> facets;
    double membrane_measure = 0.0;  // |Gamma^eps|
    double boundary_gap = 0.0;      // dist(Gamma^eps, dOmega) = a*eps

    int bulk_unknowns() const { return grid.cell_count(); }
    int membrane_unknowns() const { return static_cast<int>(facets.size()); }
    /// Bulk cells, two traces per facet and one jump per facet.
    long long total_unknowns() const {
        return static_cast<long long>(bulk_unknowns()) + 3LL * membrane_unknowns();
    }
    /// Local cell coordinate y = x/eps mod 1 of a global point.
    std::array<double, 2> local_coordinate(const std::array<double, 2>& x) const;
};

/// Default unknown budget for tile_domain.
inline constexpr long long kDefaultUnknownBudget = 4'000'000;

EpsilonDomain tile_domain(const CellGeometry& cell, double epsilon,
                          long long max_unknowns = kDefaultUnknownBudget);

/// Builds the facet list of a grid whose phase flags are given; faces across periodic
/// wrap are included when `periodic` is set.
std::vector<Facet> collect_facets(const Grid& grid, const std::vector<std::uint8_t>& inner,
                                  bool periodic);

}  // namespace tissue
