#include "tissue/geometry.hpp"

#include <cmath>
#include <sstream>

#include "tissue/errors.hpp"

namespace tissue {

namespace {

bool is_integer(double x, double tol = 1e-9) { return std::abs(x - std::round(x)) <= tol; }

// Smallest m > 0 with m*a integral, searched up to a generous cap.
int smallest_valid_resolution(double margin) {
    for (int m = 1; m <= 1 << 16; ++m) {
        if (is_integer(m * margin)) return m;
    }
    return -1;
}

}  // namespace

std::vector<Facet> collect_facets(const Grid& grid, const std::vector<std::uint8_t>& inner,
                                  bool periodic) {
    std::vector<Facet> facets;
    const int n = grid.n;
    for (int c = 0; c < grid.cell_count(); ++c) {
        const auto ij = grid.multi_index(c);
        for (int axis = 0; axis < grid.dimension; ++axis) {
            auto nb = ij;
            nb[axis] += 1;
            if (nb[axis] == n) {
                if (!periodic) continue;
                nb[axis] = 0;
            }
            const int d = grid.index(nb[0], nb[1]);
            if (inner[c] == inner[d]) continue;
            Facet f;
            f.axis = axis;
            f.inner = inner[c] ? c : d;
            f.outer = inner[c] ? d : c;
            f.sign = inner[c] ? +1 : -1;
            auto mid = grid.center(c);
            mid[axis] += 0.5 * grid.h;
            f.midpoint = mid;
            facets.push_back(f);
        }
    }
    return facets;
}

CellGeometry build_cell_geometry(double margin, int resolution, int dimension) {
    if (dimension != 1 && dimension != 2) {
        throw GeometryError("dimension must be 1 (diagnostic) or 2, got " + std::to_string(dimension));
    }
    if (!(margin > 0.0 && margin < 0.5)) {
        std::ostringstream os;
        os << "inclusion margin a=" << margin << " must lie in (0, 0.5)";
        throw GeometryError(os.str());
    }
    if (resolution <= 0 || !is_integer(resolution * margin)) {
        std::ostringstream os;
        os << "cell resolution m=" << resolution << " does not place the membrane on grid lines "
           << "(m*a=" << resolution * margin << " is not an integer); smallest valid m is "
           << smallest_valid_resolution(margin);
        throw GeometryError(os.str());
    }

    CellGeometry cell;
    cell.dimension = dimension;
    cell.margin = margin;
    cell.resolution = resolution;
    cell.inclusion_begin = static_cast<int>(std::lround(resolution * margin));
    cell.inclusion_end = resolution - cell.inclusion_begin;
    cell.grid = Grid{dimension, resolution, 1.0 / resolution};

    const double side = 1.0 - 2.0 * margin;
    if (dimension == 1) {
        cell.inner_measure = side;
        cell.membrane_measure = 2.0;
    } else {
        cell.inner_measure = side * side;
        cell.membrane_measure = 4.0 * side;
    }
    cell.outer_measure = 1.0 - cell.inner_measure;

    cell.inner.resize(cell.grid.cell_count());
    for (int c = 0; c < cell.grid.cell_count(); ++c) {
        const auto ij = cell.grid.multi_index(c);
        bool in = cell.is_inner_local(ij[0]);
        if (dimension == 2) in = in && cell.is_inner_local(ij[1]);
        cell.inner[c] = in ? 1 : 0;
    }
    cell.facets = collect_facets(cell.grid, cell.inner, /*periodic=*/true);
    return cell;
}

double mean_conductivity(const CellGeometry& cell, double sigma_inner, double sigma_outer) {
    if (!(sigma_inner > 0.0) || !(sigma_outer > 0.0)) {
        throw std::invalid_argument("conductivities must be positive");
    }
    return cell.inner_measure * sigma_inner + cell.outer_measure * sigma_outer;
}

std::array<double, 2> EpsilonDomain::local_coordinate(const std::array<double, 2>& x) const {
    std::array<double, 2> y{0.0, 0.0};
    for (int k = 0; k < cell.dimension; ++k) {
        const double s = x[k] / epsilon;
        y[k] = s - std::floor(s);
    }
    return y;
}

EpsilonDomain tile_domain(const CellGeometry& cell, double epsilon, long long max_unknowns) {
    if (!(epsilon > 0.0) || epsilon > 1.0 || !is_integer(1.0 / epsilon)) {
        std::ostringstream os;
        os << "epsilon=" << epsilon << " does not tile (0,1): 1/epsilon must be a positive integer";
        throw GeometryError(os.str());
    }
    EpsilonDomain dom;
    dom.cell = cell;
    dom.epsilon = epsilon;
    dom.tiles_per_axis = static_cast<int>(std::lround(1.0 / epsilon));
    const int n = dom.tiles_per_axis * cell.resolution;
    dom.grid = Grid{cell.dimension, n, 1.0 / n};

    const long long cells = cell.dimension == 1 ? n : static_cast<long long>(n) * n;
    const long long tiles = cell.dimension == 1 ? dom.tiles_per_axis
                                                : static_cast<long long>(dom.tiles_per_axis) * dom.tiles_per_axis;
    const long long estimate = cells + 3LL * tiles * static_cast<long long>(cell.facets.size());
    if (estimate > max_unknowns) {
        std::ostringstream os;
        os << "tiled domain needs " << estimate << " unknowns (about "
           << (estimate * 8 * 40) / (1 << 20) << " MiB with factorization), budget is " << max_unknowns;
        throw GeometryError(os.str());
    }

    dom.inner.resize(dom.grid.cell_count());
    const int m = cell.resolution;
    for (int c = 0; c < dom.grid.cell_count(); ++c) {
        const auto ij = dom.grid.multi_index(c);
        bool in = cell.is_inner_local(ij[0] % m);
        if (cell.dimension == 2) in = in && cell.is_inner_local(ij[1] % m);
        dom.inner[c] = in ? 1 : 0;
    }
    dom.facets = collect_facets(dom.grid, dom.inner, /*periodic=*/false);
    dom.membrane_measure = dom.grid.face_measure() * static_cast<double>(dom.facets.size());
    dom.boundary_gap = cell.margin * epsilon;
    return dom;
}

}  // namespace tissue
