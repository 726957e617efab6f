// Dense reference constructions used as oracles. Everything here is assembled by walking
// cell neighbours by coordinates, independently of the library's face lists.
#pragma once

#include <map>
#include <utility>

#include <Eigen/Dense>

#include "tissue/boundary_data.hpp"
#include "tissue/geometry.hpp"

namespace oracle {

using tissue::BoundaryData;
using tissue::Conductivity;
using tissue::EpsilonDomain;

struct DenseMicro {
    int cells = 0;
    int facets = 0;
    Eigen::MatrixXd A;     // bulk operator
    Eigen::MatrixXd B;     // bulk rhs per unit jump (cells x facets)
    Eigen::MatrixXd D;     // q = (D u - w)/R, the u part
    Eigen::VectorXd bpsi;  // bulk rhs of the data at psi_t = 1
    double R = 0.0;
    double face = 0.0;     // h^(N-1)
};

inline DenseMicro assemble(const EpsilonDomain& dom, const Conductivity& sg,
                           const BoundaryData& psi) {
    const auto& g = dom.grid;
    const int n = g.n;
    const int dim = g.dimension;
    const double h = g.h;
    DenseMicro o;
    o.cells = g.cell_count();
    o.facets = static_cast<int>(dom.facets.size());
    o.A = Eigen::MatrixXd::Zero(o.cells, o.cells);
    o.B = Eigen::MatrixXd::Zero(o.cells, o.facets);
    o.D = Eigen::MatrixXd::Zero(o.facets, o.cells);
    o.bpsi = Eigen::VectorXd::Zero(o.cells);
    o.face = dim == 1 ? 1.0 : h;
    const double hs = dim == 1 ? 1.0 / h : 1.0;
    o.R = 0.5 * h / sg.inner + 0.5 * h / sg.outer;
    const double tm = o.face / o.R;

    std::map<std::pair<int, int>, int> facet_of;
    for (int k = 0; k < o.facets; ++k) {
        facet_of[{dom.facets[k].inner, dom.facets[k].outer}] = k;
        o.D(k, dom.facets[k].outer) = 1.0;
        o.D(k, dom.facets[k].inner) = -1.0;
    }

    for (int j = 0; j < (dim == 1 ? 1 : n); ++j) {
        for (int i = 0; i < n; ++i) {
            const int p = i + n * j;
            const bool pin = dom.inner[p] != 0;
            const int offs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
            for (int d = 0; d < 2 * dim; ++d) {
                const int ii = i + offs[d][0];
                const int jj = j + offs[d][1];
                if (ii < 0 || ii >= n || jj < 0 || jj >= (dim == 1 ? 1 : n)) {
                    const double t = 2.0 * sg.outer * hs;
                    std::array<double, 2> x{(i + 0.5) * h, dim == 1 ? 0.0 : (j + 0.5) * h};
                    if (ii < 0) x[0] = 0.0;
                    if (ii >= n) x[0] = 1.0;
                    if (jj < 0) x[1] = 0.0;
                    if (jj >= n && dim == 2) x[1] = 1.0;
                    o.A(p, p) += t;
                    o.bpsi[p] += t * psi.spatial_value(x, dim);
                    continue;
                }
                const int q = ii + n * jj;
                const bool qin = dom.inner[q] != 0;
                if (pin == qin) {
                    const double t = (pin ? sg.inner : sg.outer) * hs;
                    o.A(p, p) += t;
                    o.A(p, q) -= t;
                } else {
                    o.A(p, p) += tm;
                    o.A(p, q) -= tm;
                    // inner P: row gets +tm w on the left, outer P: -tm w
                    const int k = pin ? facet_of.at({p, q}) : facet_of.at({q, p});
                    o.B(p, k) += pin ? -tm : tm;
                }
            }
        }
    }
    return o;
}

/// Monolithic backward Euler step for f = kappa s: unknowns (u, w).
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> linear_step(
    const DenseMicro& o, double alpha, double kappa, double ell, double dt, double psi_t,
    const Eigen::VectorXd& w_old) {
    const int nc = o.cells;
    const int nf = o.facets;
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nc + nf, nc + nf);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nc + nf);
    M.topLeftCorner(nc, nc) = o.A;
    M.topRightCorner(nc, nf) = -o.B;
    rhs.head(nc) = psi_t * o.bpsi;
    const double c = alpha / ell / dt;
    // c (w - w_old) + kappa w/ell - (D u - w)/R = 0
    M.bottomLeftCorner(nf, nc) = -o.D / o.R;
    M.bottomRightCorner(nf, nf) =
        (c + kappa / ell + 1.0 / o.R) * Eigen::MatrixXd::Identity(nf, nf);
    rhs.tail(nf) = c * w_old;
    const Eigen::VectorXd x = M.fullPivLu().solve(rhs);
    return {x.head(nc), x.tail(nf)};
}

/// Dense Schur operator S with q = q0 - S w.
inline Eigen::MatrixXd schur(const DenseMicro& o) {
    const Eigen::MatrixXd L = o.A.fullPivLu().solve(o.B);
    return (Eigen::MatrixXd::Identity(o.facets, o.facets) - o.D * L) / o.R;
}

/// a(u,u) of the state with data psi_t and jump w (bulk solved densely).
inline double energy(const DenseMicro& o, const EpsilonDomain& dom, const Conductivity& sg,
                     const BoundaryData& psi, double psi_t, const Eigen::VectorXd& w) {
    const Eigen::VectorXd u = o.A.fullPivLu().solve(psi_t * o.bpsi + o.B * w);
    const auto& g = dom.grid;
    const double h = g.h;
    const int dim = g.dimension;
    const double hs = dim == 1 ? 1.0 / h : 1.0;
    double a = 0.0;
    const int n = g.n;
    for (int p = 0; p < o.cells; ++p) {
        const int i = p % n;
        const int j = dim == 1 ? 0 : p / n;
        if (i + 1 < n) {
            const int q = p + 1;
            if (dom.inner[p] == dom.inner[q]) {
                a += (dom.inner[p] ? sg.inner : sg.outer) * hs * std::pow(u[q] - u[p], 2);
            }
        }
        if (dim == 2 && j + 1 < n) {
            const int q = p + n;
            if (dom.inner[p] == dom.inner[q]) {
                a += (dom.inner[p] ? sg.inner : sg.outer) * hs * std::pow(u[q] - u[p], 2);
            }
        }
    }
    double bsq = 0.0;
    for (int p = 0; p < o.cells; ++p) {
        const int i = p % n;
        const int j = dim == 1 ? 0 : p / n;
        const double t = 2.0 * sg.outer * hs;
        auto add = [&](std::array<double, 2> x) {
            const double v = psi_t * psi.spatial_value(x, dim);
            bsq += t * (v - u[p]) * (v - u[p]);
        };
        const double xc = (i + 0.5) * h;
        const double yc = dim == 1 ? 0.0 : (j + 0.5) * h;
        if (i == 0) add({0.0, yc});
        if (i == n - 1) add({1.0, yc});
        if (dim == 2 && j == 0) add({xc, 0.0});
        if (dim == 2 && j == n - 1) add({xc, 1.0});
    }
    const Eigen::VectorXd dm = o.D * u - w;
    return a + bsq + o.face / o.R * dm.squaredNorm();
}

}  // namespace oracle

namespace oracle {

/// Affine one-period map w -> M w + b of the linear backward Euler scheme, propagated densely.
struct AffineMap {
    Eigen::MatrixXd M;
    Eigen::VectorXd b;
};

inline AffineMap monodromy(const DenseMicro& o, double alpha, double kappa, double ell, double dt,
                           int steps, const tissue::BoundaryData& psi) {
    const Eigen::MatrixXd S = schur(o);
    const Eigen::VectorXd q0 = o.D * o.A.fullPivLu().solve(o.bpsi) / o.R;
    const int nf = o.facets;
    const double c = alpha / ell / dt;
    const Eigen::MatrixXd J =
        (c + kappa / ell) * Eigen::MatrixXd::Identity(nf, nf) + S;
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
    const Eigen::MatrixXd step = lu.solve(c * Eigen::MatrixXd::Identity(nf, nf));
    const Eigen::VectorXd kick = lu.solve(q0);
    AffineMap m{Eigen::MatrixXd::Identity(nf, nf), Eigen::VectorXd::Zero(nf)};
    for (int n = 1; n <= steps; ++n) {
        m.M = step * m.M;
        m.b = step * m.b + psi.temporal_value(n * dt) * kick;
    }
    return m;
}

}  // namespace oracle
