#pragma once

// Dense two-scale oracle: the total discrete energy written out directly, its Hessian
// taken by polarization, and one linear backward Euler step solved as a single
// minimization over (U, u1, w).

#include <array>
#include <cmath>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "tissue/boundary_data.hpp"
#include "tissue/geometry.hpp"

namespace oracle2s {

struct Model {
    int dim = 2;
    int M = 2;
    int m = 4;
    double h = 0.25;
    tissue::Conductivity sigma;
    tissue::CellGeometry cell;
    std::vector<std::array<double, 2>> nodes;
    std::vector<std::vector<int>> elements;
    std::vector<double> area;
    std::vector<bool> boundary;
    std::map<std::pair<int, int>, int> facet_of;  // (inner, outer) -> facet index
    int nn = 0, ne = 0, nc = 0, nf = 0;

    int n() const { return nn + ne * nc + ne * nf; }
    int u_index(int e, int c) const { return nn + e * nc + c; }
    int w_index(int e, int f) const { return nn + ne * nc + e * nf + f; }
    double mu(int e) const { return area[e] * (dim == 1 ? 1.0 : h); }
};

inline Model build(int dim, int M, const tissue::CellGeometry& cell, tissue::Conductivity sigma) {
    Model o;
    o.dim = dim;
    o.M = M;
    o.m = cell.resolution;
    o.h = 1.0 / cell.resolution;
    o.sigma = sigma;
    o.cell = cell;
    const double H = 1.0 / M;
    if (dim == 1) {
        for (int i = 0; i <= M; ++i) {
            o.nodes.push_back({i * H, 0.0});
            o.boundary.push_back(i == 0 || i == M);
        }
        for (int i = 0; i < M; ++i) {
            o.elements.push_back({i, i + 1});
            o.area.push_back(H);
        }
    } else {
        for (int j = 0; j <= M; ++j) {
            for (int i = 0; i <= M; ++i) {
                o.nodes.push_back({i * H, j * H});
                o.boundary.push_back(i == 0 || j == 0 || i == M || j == M);
            }
        }
        for (int j = 0; j < M; ++j) {
            for (int i = 0; i < M; ++i) {
                const int a = i + (M + 1) * j;
                const int b = a + 1;
                const int c = b + M + 1;
                const int d = a + M + 1;
                o.elements.push_back({a, b, c});
                o.elements.push_back({a, c, d});
                o.area.push_back(0.5 * H * H);
                o.area.push_back(0.5 * H * H);
            }
        }
    }
    o.nn = static_cast<int>(o.nodes.size());
    o.ne = static_cast<int>(o.elements.size());
    o.nc = dim == 1 ? o.m : o.m * o.m;
    o.nf = static_cast<int>(cell.facets.size());
    for (int k = 0; k < o.nf; ++k) o.facet_of[{cell.facets[k].inner, cell.facets[k].outer}] = k;
    return o;
}

/// Gradient of the P1 interpolant of nodal values U on element e.
inline std::array<double, 2> gradient(const Model& o, const Eigen::VectorXd& U, int e) {
    const auto& el = o.elements[e];
    if (o.dim == 1) return {(U[el[1]] - U[el[0]]) / (o.nodes[el[1]][0] - o.nodes[el[0]][0]), 0.0};
    Eigen::Matrix2d B;
    const auto& p0 = o.nodes[el[0]];
    const auto& p1 = o.nodes[el[1]];
    const auto& p2 = o.nodes[el[2]];
    B << p1[0] - p0[0], p1[1] - p0[1], p2[0] - p0[0], p2[1] - p0[1];
    const Eigen::Vector2d g = B.fullPivLu().solve(Eigen::Vector2d(U[el[1]] - U[el[0]], U[el[2]] - U[el[0]]));
    return {g[0], g[1]};
}

inline bool is_inner(const Model& o, int i, int j) {
    const int b = o.cell.inclusion_begin;
    const int e = o.cell.inclusion_end;
    const bool x = i >= b && i < e;
    return o.dim == 1 ? x : (x && j >= b && j < e);
}

/// Total energy sum_e |e| int_Y sigma |G + grad_y u1|^2 of the full unknown vector z.
inline double energy(const Model& o, const Eigen::VectorXd& z) {
    const double h = o.h;
    const double ts = o.dim == 1 ? 1.0 / h : 1.0;
    const double R = 0.5 * h * (1.0 / o.sigma.inner + 1.0 / o.sigma.outer);
    const double tm = (o.dim == 1 ? 1.0 : h) / R;
    const Eigen::VectorXd U = z.head(o.nn);
    double total = 0.0;
    for (int e = 0; e < o.ne; ++e) {
        const auto G = gradient(o, U, e);
        double s = 0.0;
        const int nj = o.dim == 1 ? 1 : o.m;
        for (int j = 0; j < nj; ++j) {
            for (int i = 0; i < o.m; ++i) {
                const int c = i + o.m * j;
                for (int k = 0; k < o.dim; ++k) {
                    const int ni = k == 0 ? (i + 1) % o.m : i;
                    const int nj2 = k == 1 ? (j + 1) % o.m : j;
                    const int d = ni + o.m * nj2;
                    const bool ci = is_inner(o, i, j);
                    const bool di = is_inner(o, ni, nj2);
                    const double uc = z[o.u_index(e, c)];
                    const double ud = z[o.u_index(e, d)];
                    if (ci == di) {
                        const double v = ud - uc + G[k] * h;
                        s += (ci ? o.sigma.inner : o.sigma.outer) * ts * v * v;
                    } else if (ci) {
                        const double w = z[o.w_index(e, o.facet_of.at({c, d}))];
                        const double v = ud - uc + G[k] * h - w;
                        s += tm * v * v;
                    } else {
                        const double w = z[o.w_index(e, o.facet_of.at({d, c}))];
                        const double v = uc - ud - G[k] * h - w;
                        s += tm * v * v;
                    }
                }
            }
        }
        total += o.area[e] * s;
    }
    return total;
}

/// Q with energy(z) = z^T Q z.
inline Eigen::MatrixXd hessian(const Model& o) {
    const int n = o.n();
    Eigen::VectorXd diag(n);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        z[i] = 1.0;
        diag[i] = energy(o, z);
        z[i] = 0.0;
    }
    Eigen::MatrixXd Q(n, n);
    for (int i = 0; i < n; ++i) {
        Q(i, i) = diag[i];
        for (int j = i + 1; j < n; ++j) {
            z[i] = 1.0;
            z[j] = 1.0;
            Q(i, j) = Q(j, i) = 0.5 * (energy(o, z) - diag[i] - diag[j]);
            z[i] = 0.0;
            z[j] = 0.0;
        }
    }
    return Q;
}

/// One linear backward Euler step (length scale 1, f = kappa s).
struct Stepper {
    const Model& o;
    Eigen::MatrixXd Q;
    std::vector<int> free;
    std::vector<int> fixed;
    Eigen::FullPivLU<Eigen::MatrixXd> lu;
    double alpha, kappa, dt;

    Stepper(const Model& model, double a, double k, double step)
        : o(model), Q(hessian(model)), alpha(a), kappa(k), dt(step) {
        for (int i = 0; i < o.n(); ++i) {
            if (i < o.nn && o.boundary[i]) fixed.push_back(i);
            else free.push_back(i);
        }
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(o.n(), o.n());
        A += Q;
        for (int e = 0; e < o.ne; ++e) {
            for (int f = 0; f < o.nf; ++f) {
                A(o.w_index(e, f), o.w_index(e, f)) += (alpha / dt + kappa) * o.mu(e);
            }
            for (int c = 0; c < o.nc; ++c) {
                for (int d = 0; d < o.nc; ++d) A(o.u_index(e, c), o.u_index(e, d)) += 1.0;
            }
        }
        Eigen::MatrixXd AFF(free.size(), free.size());
        for (std::size_t a = 0; a < free.size(); ++a) {
            for (std::size_t b = 0; b < free.size(); ++b) AFF(a, b) = A(free[a], free[b]);
        }
        lu.compute(AFF);
    }

    /// Full unknown vector after one step from jump w_old with boundary nodal values UB.
    Eigen::VectorXd step(const Eigen::VectorXd& w_old, const Eigen::VectorXd& UB) const {
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(o.n());
        for (int e = 0; e < o.ne; ++e) {
            for (int f = 0; f < o.nf; ++f) {
                rhs[o.w_index(e, f)] = alpha / dt * o.mu(e) * w_old[e * o.nf + f];
            }
        }
        Eigen::VectorXd zB = Eigen::VectorXd::Zero(o.n());
        for (int i : fixed) zB[i] = UB[i];
        rhs -= Q * zB;
        Eigen::VectorXd bF(free.size());
        for (std::size_t a = 0; a < free.size(); ++a) bF[a] = rhs[free[a]];
        const Eigen::VectorXd xF = lu.solve(bF);
        Eigen::VectorXd z = zB;
        for (std::size_t a = 0; a < free.size(); ++a) z[free[a]] = xF[a];
        return z;
    }

    Eigen::VectorXd jumps(const Eigen::VectorXd& z) const { return z.tail(o.ne * o.nf); }

    Eigen::VectorXd boundary_values(const tissue::BoundaryData& psi, double t) const {
        Eigen::VectorXd UB = Eigen::VectorXd::Zero(o.nn);
        for (int i = 0; i < o.nn; ++i) {
            if (o.boundary[i]) UB[i] = psi.value(o.nodes[i], o.dim, t);
        }
        return UB;
    }
};

}  // namespace oracle2s
