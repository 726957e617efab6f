#include "tissue/two_scale.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tissue/errors.hpp"
#include "tissue/micro_solver.hpp"

namespace tissue {

namespace {

double pow_h(double h, int e) { return e == 0 ? 1.0 : (e == -1 ? 1.0 / h : std::pow(h, e)); }

}  // namespace

CellOperator assemble_cell_operator(const CellGeometry& cell, const Conductivity& sigma) {
    CellOperator op;
    op.cell = cell;
    op.sigma = sigma;
    const Grid& g = cell.grid;
    const int dim = g.dimension;
    const double h = g.h;
    const double ts = pow_h(h, dim - 2);
    op.membrane_resistance = sigma.membrane_resistance(h);
    op.membrane_transmissibility = g.face_measure() / op.membrane_resistance;

    std::vector<Eigen::Triplet<double>> trip;
    auto couple = [&trip](int p, int q, double t) {
        trip.emplace_back(p, p, t);
        trip.emplace_back(q, q, t);
        trip.emplace_back(p, q, -t);
        trip.emplace_back(q, p, -t);
    };
    for (int c = 0; c < g.cell_count(); ++c) {
        const auto ij = g.multi_index(c);
        const bool in = cell.inner[c] != 0;
        for (int axis = 0; axis < dim; ++axis) {
            auto nb = ij;
            nb[axis] = (nb[axis] + 1) % g.n;
            const int d = g.index(nb[0], nb[1]);
            if ((cell.inner[d] != 0) != in) continue;
            const double t = sigma.of(in) * ts;
            op.faces.push_back({c, d, axis, t});
            couple(c, d, t);
        }
    }
    for (const auto& f : cell.facets) couple(f.inner, f.outer, op.membrane_transmissibility);
    const int n = g.cell_count();
    op.matrix.resize(n, n);
    op.matrix.setFromTriplets(trip.begin(), trip.end());

    std::vector<Eigen::Triplet<double>> pinned;
    for (const auto& t : trip) {
        if (t.row() != 0 && t.col() != 0) pinned.push_back(t);
    }
    pinned.emplace_back(0, 0, 1.0);
    Eigen::SparseMatrix<double> P(n, n);
    P.setFromTriplets(pinned.begin(), pinned.end());
    op.pinned = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>(P);
    if (op.pinned->info() != Eigen::Success) {
        throw SolverError("cell operator factorization failed (singular assembly)");
    }

    const int nf = op.facets();
    op.response_gradient.resize(n, dim);
    op.response_jump.resize(n, nf);
    op.A_hom.resize(dim, dim);
    op.C.resize(dim, nf);
    op.Q_G.resize(nf, dim);
    op.S_q.resize(nf, nf);
    const Eigen::VectorXd w0 = Eigen::VectorXd::Zero(nf);
    const Eigen::VectorXd G0 = Eigen::VectorXd::Zero(dim);
    for (int k = 0; k < dim; ++k) {
        const Eigen::VectorXd G = Eigen::VectorXd::Unit(dim, k);
        const Eigen::VectorXd u = op.corrector(G, w0);
        op.response_gradient.col(k) = u;
        op.A_hom.col(k) = op.macro_flux(u, G, w0);
        op.Q_G.col(k) = op.facet_flux(u, G, w0);
    }
    for (int f = 0; f < nf; ++f) {
        const Eigen::VectorXd w = Eigen::VectorXd::Unit(nf, f);
        const Eigen::VectorXd u = op.corrector(G0, w);
        op.response_jump.col(f) = u;
        op.C.col(f) = op.macro_flux(u, G0, w);
        op.S_q.col(f) = -op.facet_flux(u, G0, w);
    }
    return op;
}

Eigen::VectorXd CellOperator::rhs(const Eigen::VectorXd& G, const Eigen::VectorXd& w) const {
    const double h = cell.grid.h;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(cells());
    for (const auto& f : faces) {
        const double v = f.transmissibility * G[f.axis] * h;
        b[f.p] += v;
        b[f.q] -= v;
    }
    for (int k = 0; k < facets(); ++k) {
        const auto& f = cell.facets[k];
        const double v = membrane_transmissibility * (f.sign * G[f.axis] * h - w[k]);
        b[f.inner] += v;
        b[f.outer] -= v;
    }
    return b;
}

Eigen::VectorXd CellOperator::solve(const Eigen::VectorXd& b) const {
    Eigen::VectorXd rhs0 = b;
    rhs0[0] = 0.0;
    Eigen::VectorXd u = pinned->solve(rhs0);
    u.array() -= u.mean();
    const double bnorm = b.norm();
    if (bnorm > 0.0) {
        const double res = (matrix * u - b).norm() / bnorm;
        if (!(res <= 1e-10)) {
            std::ostringstream os;
            os << "cell solve relative residual " << res << " exceeds 1e-10";
            throw SolverError(os.str(), {res});
        }
    }
    return u;
}

Eigen::VectorXd CellOperator::corrector(const Eigen::VectorXd& G, const Eigen::VectorXd& w) const {
    return solve(rhs(G, w));
}

Eigen::VectorXd CellOperator::facet_flux(const Eigen::VectorXd& u, const Eigen::VectorXd& G,
                                         const Eigen::VectorXd& w) const {
    const double h = cell.grid.h;
    Eigen::VectorXd q(facets());
    for (int k = 0; k < facets(); ++k) {
        const auto& f = cell.facets[k];
        q[k] = (u[f.outer] - u[f.inner] + f.sign * G[f.axis] * h - w[k]) / membrane_resistance;
    }
    return q;
}

Eigen::VectorXd CellOperator::macro_flux(const Eigen::VectorXd& u, const Eigen::VectorXd& G,
                                         const Eigen::VectorXd& w) const {
    const double h = cell.grid.h;
    Eigen::VectorXd J = Eigen::VectorXd::Zero(dimension());
    for (const auto& f : faces) {
        J[f.axis] += h * f.transmissibility * (u[f.q] - u[f.p] + G[f.axis] * h);
    }
    for (int k = 0; k < facets(); ++k) {
        const auto& f = cell.facets[k];
        const double d = u[f.outer] - u[f.inner] + f.sign * G[f.axis] * h - w[k];
        J[f.axis] += h * f.sign * membrane_transmissibility * d;
    }
    return J;
}

double CellOperator::energy(const Eigen::VectorXd& u, const Eigen::VectorXd& G,
                            const Eigen::VectorXd& w) const {
    const double h = cell.grid.h;
    double e = 0.0;
    for (const auto& f : faces) {
        const double d = u[f.q] - u[f.p] + G[f.axis] * h;
        e += f.transmissibility * d * d;
    }
    for (int k = 0; k < facets(); ++k) {
        const auto& f = cell.facets[k];
        const double d = u[f.outer] - u[f.inner] + f.sign * G[f.axis] * h - w[k];
        e += membrane_transmissibility * d * d;
    }
    return e;
}

double CellOperator::gradient_norm2(const Eigen::VectorXd& u, const Eigen::VectorXd& G,
                                    const Eigen::VectorXd& w) const {
    const Grid& g = cell.grid;
    const double hs = pow_h(g.h, g.dimension - 2);
    double s = 0.0;
    for (const auto& f : faces) {
        const double d = u[f.q] - u[f.p];
        s += hs * d * d;
    }
    const Eigen::VectorXd q = facet_flux(u, G, w);
    for (int k = 0; k < facets(); ++k) {
        const auto& f = cell.facets[k];
        const double gn = f.sign * G[f.axis];
        const double a = q[k] / sigma.inner - gn;
        const double b = q[k] / sigma.outer - gn;
        s += 0.5 * g.cell_volume() * (a * a + b * b);
    }
    return s;
}

MacroMesh build_macro_mesh(int dimension, int resolution) {
    if (dimension != 1 && dimension != 2) throw GeometryError("macro dimension must be 1 or 2");
    if (resolution < 1) throw GeometryError("macro resolution must be at least 1");
    MacroMesh m;
    m.dimension = dimension;
    m.resolution = resolution;
    m.H = 1.0 / resolution;
    const int M = resolution;
    if (dimension == 1) {
        for (int i = 0; i <= M; ++i) {
            m.nodes.push_back({i * m.H, 0.0});
            m.interior_index.push_back(i == 0 || i == M ? -1 : m.interior_count++);
        }
        for (int i = 0; i < M; ++i) {
            m.elements.push_back({i, i + 1, -1});
            m.measure.push_back(m.H);
            m.gradients.push_back({{{-1.0 / m.H, 0.0}, {1.0 / m.H, 0.0}, {0.0, 0.0}}});
        }
        return m;
    }
    auto id = [M](int i, int j) { return i + (M + 1) * j; };
    for (int j = 0; j <= M; ++j) {
        for (int i = 0; i <= M; ++i) {
            m.nodes.push_back({i * m.H, j * m.H});
            const bool edge = i == 0 || j == 0 || i == M || j == M;
            m.interior_index.push_back(edge ? -1 : m.interior_count++);
        }
    }
    auto add = [&m](int a, int b, int c) {
        const auto& p0 = m.nodes[a];
        const auto& p1 = m.nodes[b];
        const auto& p2 = m.nodes[c];
        Eigen::Matrix2d B;
        B << p1[0] - p0[0], p2[0] - p0[0], p1[1] - p0[1], p2[1] - p0[1];
        const Eigen::Matrix2d Bi = B.inverse();
        std::array<std::array<double, 2>, 3> g{};
        g[1] = {Bi(0, 0), Bi(0, 1)};
        g[2] = {Bi(1, 0), Bi(1, 1)};
        g[0] = {-g[1][0] - g[2][0], -g[1][1] - g[2][1]};
        m.elements.push_back({a, b, c});
        m.measure.push_back(0.5 * std::abs(B.determinant()));
        m.gradients.push_back(g);
    };
    for (int j = 0; j < M; ++j) {
        for (int i = 0; i < M; ++i) {
            add(id(i, j), id(i + 1, j), id(i + 1, j + 1));
            add(id(i, j), id(i + 1, j + 1), id(i, j + 1));
        }
    }
    return m;
}

std::array<double, 2> MacroMesh::centroid(int e) const {
    std::array<double, 2> c{0.0, 0.0};
    for (int a = 0; a < vertices(); ++a) {
        c[0] += nodes[elements[e][a]][0];
        c[1] += nodes[elements[e][a]][1];
    }
    return {c[0] / vertices(), c[1] / vertices()};
}

double MacroMesh::interpolate(const Eigen::VectorXd& U, const std::array<double, 2>& x) const {
    const int M = resolution;
    const int i = std::clamp(static_cast<int>(std::floor(x[0] / H)), 0, M - 1);
    int e = i;
    if (dimension == 2) {
        const int j = std::clamp(static_cast<int>(std::floor(x[1] / H)), 0, M - 1);
        const bool lower = (x[1] / H - j) <= (x[0] / H - i);
        e = 2 * (i + M * j) + (lower ? 0 : 1);
    }
    const auto& p0 = nodes[elements[e][0]];
    double v = U[elements[e][0]];
    for (int a = 0; a < vertices(); ++a) {
        const double ua = U[elements[e][a]];
        v += ua * (gradients[e][a][0] * (x[0] - p0[0]) + gradients[e][a][1] * (x[1] - p0[1]));
    }
    return v;
}

TwoScaleSystem::TwoScaleSystem(const MacroMesh& mesh, const CellGeometry& cell,
                               const Conductivity& sigma, const BoundaryData& psi,
                               int dense_limit)
    : mesh_(mesh), op_(assemble_cell_operator(cell, sigma)), psi_(psi) {
    if (mesh.dimension != cell.dimension) {
        throw GeometryError("macro and cell dimensions differ");
    }
    const int N = mesh_.dimension;
    const int nn = mesh_.node_count();
    const int ne = mesh_.element_count();
    const int nf = op_.facets();
    K_ = Eigen::MatrixXd::Zero(nn, nn);
    mass_ = Eigen::MatrixXd::Zero(nn, nn);
    for (int e = 0; e < ne; ++e) {
        const double m = mesh_.measure[e];
        const int nv = mesh_.vertices();
        for (int a = 0; a < nv; ++a) {
            Eigen::VectorXd ga(N);
            for (int k = 0; k < N; ++k) ga[k] = mesh_.gradients[e][a][k];
            const Eigen::VectorXd Aga = op_.A_hom * ga;
            for (int b = 0; b < nv; ++b) {
                double s = 0.0;
                for (int k = 0; k < N; ++k) s += Aga[k] * mesh_.gradients[e][b][k];
                const int A = mesh_.elements[e][a];
                const int B = mesh_.elements[e][b];
                K_(B, A) += m * s;
                mass_(A, B) += m / (N == 2 ? 12.0 : 6.0) * (a == b ? 2.0 : 1.0);
            }
        }
    }
    K_ = 0.5 * (K_ + K_.transpose());
    for (int i = 0; i < nn; ++i) {
        if (mesh_.interior_index[i] >= 0) interior_nodes_.push_back(i);
    }
    const int ni = static_cast<int>(interior_nodes_.size());
    if (ni > 0) {
        Eigen::MatrixXd KII(ni, ni);
        for (int a = 0; a < ni; ++a) {
            for (int b = 0; b < ni; ++b) KII(a, b) = K_(interior_nodes_[a], interior_nodes_[b]);
        }
        K_II_.compute(KII);
        if (K_II_.info() != Eigen::Success) throw SolverError("macro stiffness factorization failed");
    }

    const double hf = cell.grid.face_measure();
    mu_.resize(ne * nf);
    for (int e = 0; e < ne; ++e) mu_.segment(e * nf, nf).setConstant(mesh_.measure[e] * hf);

    q0_ = Eigen::VectorXd::Zero(size());
    if (!psi_.spatially_constant()) {
        const Eigen::MatrixXd G = element_gradients(macro_values(Eigen::VectorXd::Zero(size()), 1.0));
        for (int e = 0; e < ne; ++e) q0_.segment(e * nf, nf) = op_.Q_G * G.col(e);
    }

    if (size() <= dense_limit) {
        Eigen::MatrixXd S(size(), size());
        Eigen::VectorXd col;
        for (int j = 0; j < size(); ++j) {
            apply_schur(Eigen::VectorXd::Unit(size(), j), col);
            S.col(j) = col;
        }
        // mu S is symmetric
        const Eigen::MatrixXd W = mu_.asDiagonal() * S;
        S = mu_.cwiseInverse().asDiagonal() * (0.5 * (W + W.transpose()));
        schur_ = std::move(S);
        diag_ = schur_->diagonal();
    } else {
        diag_.resize(size());
        for (int e = 0; e < ne; ++e) diag_.segment(e * nf, nf) = op_.S_q.diagonal();
    }

    Eigen::VectorXd interp(nn);
    for (int i = 0; i < nn; ++i) interp[i] = psi_.spatial_value(mesh_.nodes[i], N);
    const Eigen::MatrixXd G = element_gradients(interp);
    const Eigen::VectorXd u0 = Eigen::VectorXd::Zero(op_.cells());
    const Eigen::VectorXd w0 = Eigen::VectorXd::Zero(nf);
    for (int e = 0; e < ne; ++e) {
        data_energy_ += mesh_.measure[e] * op_.energy(u0, G.col(e), w0);
    }
}

Eigen::VectorXd TwoScaleSystem::boundary_vector(double psi_t) const {
    Eigen::VectorXd U = Eigen::VectorXd::Zero(mesh_.node_count());
    for (int i = 0; i < mesh_.node_count(); ++i) {
        if (mesh_.interior_index[i] < 0) {
            U[i] = psi_t * psi_.spatial_value(mesh_.nodes[i], mesh_.dimension);
        }
    }
    return U;
}

Eigen::VectorXd TwoScaleSystem::macro_values(const Eigen::VectorXd& w, double psi_t) const {
    const int N = mesh_.dimension;
    const int nf = op_.facets();
    const int nn = mesh_.node_count();
    Eigen::VectorXd load = Eigen::VectorXd::Zero(nn);
    for (int e = 0; e < mesh_.element_count(); ++e) {
        const Eigen::VectorXd Cw = op_.C * w.segment(e * nf, nf);
        for (int a = 0; a < mesh_.vertices(); ++a) {
            double s = 0.0;
            for (int k = 0; k < N; ++k) s += mesh_.gradients[e][a][k] * Cw[k];
            load[mesh_.elements[e][a]] -= mesh_.measure[e] * s;
        }
    }
    Eigen::VectorXd U;
    if (psi_.spatially_constant()) {
        U = Eigen::VectorXd::Constant(nn, psi_.amplitude * psi_t);
    } else {
        U = boundary_vector(psi_t);
        load -= K_ * U;
    }
    const int ni = static_cast<int>(interior_nodes_.size());
    if (ni == 0) return U;
    Eigen::VectorXd b(ni);
    for (int a = 0; a < ni; ++a) b[a] = load[interior_nodes_[a]];
    const Eigen::VectorXd x = K_II_.solve(b);
    for (int a = 0; a < ni; ++a) U[interior_nodes_[a]] += x[a];
    return U;
}

Eigen::MatrixXd TwoScaleSystem::element_gradients(const Eigen::VectorXd& U) const {
    const int N = mesh_.dimension;
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(N, mesh_.element_count());
    for (int e = 0; e < mesh_.element_count(); ++e) {
        for (int a = 0; a < mesh_.vertices(); ++a) {
            const double ua = U[mesh_.elements[e][a]];
            for (int k = 0; k < N; ++k) G(k, e) += ua * mesh_.gradients[e][a][k];
        }
    }
    return G;
}

void TwoScaleSystem::apply_schur(const Eigen::VectorXd& w, Eigen::VectorXd& out) const {
    if (schur_) {
        out.noalias() = *schur_ * w;
        return;
    }
    const int nf = op_.facets();
    const Eigen::MatrixXd G = element_gradients(macro_values(w, 0.0));
    out.resize(size());
    for (int e = 0; e < mesh_.element_count(); ++e) {
        out.segment(e * nf, nf) = op_.S_q * w.segment(e * nf, nf) - op_.Q_G * G.col(e);
    }
}

TwoScaleState TwoScaleSystem::state(const Eigen::VectorXd& w, double t) const {
    if (w.size() != size() || !w.allFinite()) {
        throw std::invalid_argument("jump vector has the wrong size or non-finite entries");
    }
    const int ne = mesh_.element_count();
    const int nf = op_.facets();
    const double h = op_.cell.grid.h;
    TwoScaleState s;
    s.t = t;
    s.U = macro_values(w, psi_.temporal_value(t));
    s.G = element_gradients(s.U);
    s.corrector.resize(op_.cells(), ne);
    s.w = Eigen::Map<const Eigen::MatrixXd>(w.data(), nf, ne);
    s.q.resize(nf, ne);
    s.flux.resize(mesh_.dimension, ne);
    for (int e = 0; e < ne; ++e) {
        const Eigen::VectorXd G = s.G.col(e);
        const Eigen::VectorXd we = s.w.col(e);
        const Eigen::VectorXd u = op_.corrector(G, we);
        s.corrector.col(e) = u;
        s.q.col(e) = op_.facet_flux(u, G, we);
        s.flux.col(e) = op_.macro_flux(u, G, we);
        s.max_mean = std::max(s.max_mean, std::abs(u.mean()));
        for (int k = 0; k < nf; ++k) {
            const auto& f = op_.cell.facets[k];
            const double gn = f.sign * G[f.axis];
            const double qk = s.q(k, e);
            // half-cell fluxes through the traces on either side
            const double tin = u[f.inner] + (qk / op_.sigma.inner - gn) * 0.5 * h;
            const double tout = u[f.outer] - (qk / op_.sigma.outer - gn) * 0.5 * h;
            const double q_in = op_.sigma.inner * (gn + (tin - u[f.inner]) / (0.5 * h));
            const double q_out = op_.sigma.outer * (gn + (u[f.outer] - tout) / (0.5 * h));
            s.flux_residual = std::max(s.flux_residual, std::abs(q_in - q_out));
            s.flux_residual = std::max(s.flux_residual, std::abs(tout - tin - we[k]));
        }
    }
    const Rows r = rows(s);
    auto rel = [](const Eigen::VectorXd& v, const Eigen::VectorXd& scale) {
        double m = 0.0;
        for (int i = 0; i < v.size(); ++i) {
            if (scale[i] > 0.0) m = std::max(m, std::abs(v[i]) / scale[i]);
        }
        return m;
    };
    s.macro_residual = rel(r.macro, r.macro_scale);
    s.cell_residual = rel(r.cell, r.cell_scale);
    return s;
}

TwoScaleSystem::Rows TwoScaleSystem::rows(const TwoScaleState& s) const {
    const int N = mesh_.dimension;
    const int ne = mesh_.element_count();
    const int nc = op_.cells();
    const int nf = op_.facets();
    const double h = op_.cell.grid.h;
    Rows r;
    Eigen::VectorXd all = Eigen::VectorXd::Zero(mesh_.node_count());
    Eigen::VectorXd all_abs = Eigen::VectorXd::Zero(mesh_.node_count());
    r.cell = Eigen::VectorXd::Zero(ne * nc);
    r.cell_scale = Eigen::VectorXd::Zero(ne * nc);
    r.flux.resize(ne * nf);
    for (int e = 0; e < ne; ++e) {
        const double m = mesh_.measure[e];
        for (int a = 0; a < mesh_.vertices(); ++a) {
            double v = 0.0;
            for (int k = 0; k < N; ++k) v += mesh_.gradients[e][a][k] * s.flux(k, e);
            all[mesh_.elements[e][a]] += m * v;
            all_abs[mesh_.elements[e][a]] += m * std::abs(v);
        }
        const auto u = s.corrector.col(e);
        const auto G = s.G.col(e);
        auto add = [&](int p, int q, double flux) {
            r.cell[e * nc + q] += m * flux;
            r.cell[e * nc + p] -= m * flux;
            r.cell_scale[e * nc + q] += m * std::abs(flux);
            r.cell_scale[e * nc + p] += m * std::abs(flux);
        };
        for (const auto& f : op_.faces) {
            add(f.p, f.q, f.transmissibility * (u[f.q] - u[f.p] + G[f.axis] * h));
        }
        for (int k = 0; k < nf; ++k) {
            const auto& f = op_.cell.facets[k];
            add(f.inner, f.outer,
                op_.membrane_transmissibility *
                    (u[f.outer] - u[f.inner] + f.sign * G[f.axis] * h - s.w(k, e)));
            r.flux[e * nf + k] = mu_[e * nf + k] * s.q(k, e);
        }
    }
    const int ni = static_cast<int>(interior_nodes_.size());
    r.macro.resize(ni);
    r.macro_scale.resize(ni);
    for (int a = 0; a < ni; ++a) {
        r.macro[a] = all[interior_nodes_[a]];
        r.macro_scale[a] = all_abs[interior_nodes_[a]];
    }
    return r;
}

std::vector<std::string> TwoScaleSystem::norm_names() const {
    return {"H1_macro", "L2_corrector", "L2_grad_y", "L2_jump"};
}

std::vector<double> TwoScaleSystem::norms(const Eigen::VectorXd& w, double psi_t) const {
    const int nf = op_.facets();
    const Eigen::VectorXd U = macro_values(w, psi_t);
    const Eigen::MatrixXd G = element_gradients(U);
    double h1 = U.dot(mass_ * U);
    double l2 = 0.0;
    double grad = 0.0;
    const double vol = op_.cell.grid.cell_volume();
    for (int e = 0; e < mesh_.element_count(); ++e) {
        const double m = mesh_.measure[e];
        const Eigen::VectorXd we = w.segment(e * nf, nf);
        const Eigen::VectorXd u = op_.corrector(G.col(e), we);
        h1 += m * G.col(e).squaredNorm();
        l2 += m * vol * u.squaredNorm();
        grad += m * op_.gradient_norm2(u, G.col(e), we);
    }
    return {std::sqrt(std::max(h1, 0.0)), std::sqrt(l2), std::sqrt(grad), weighted_norm(w)};
}

double TwoScaleSystem::energy(const Eigen::VectorXd& w, double psi_t) const {
    const int nf = op_.facets();
    const Eigen::MatrixXd G = element_gradients(macro_values(w, psi_t));
    double a = 0.0;
    for (int e = 0; e < mesh_.element_count(); ++e) {
        const Eigen::VectorXd we = w.segment(e * nf, nf);
        const Eigen::VectorXd u = op_.corrector(G.col(e), we);
        a += mesh_.measure[e] * op_.energy(u, G.col(e), we);
    }
    return a;
}

Eigen::VectorXd TwoScaleSystem::initial_jump(const InitialJump& s) const {
    std::vector<std::array<double, 2>> x, y;
    for (int e = 0; e < mesh_.element_count(); ++e) {
        const auto c = mesh_.centroid(e);
        for (const auto& f : op_.cell.facets) {
            x.push_back(c);
            y.push_back(f.midpoint);
        }
    }
    return s.sample(x, y, op_.cell);
}

WeakFormReport weak_form_residual(const TwoScaleSystem& sys, const Nonlinearity& f,
                                  const SolverParams& p, const Trajectory& traj, bool periodic) {
    if (traj.stride != 1) throw std::invalid_argument("weak-form check needs every step");
    const int N = static_cast<int>(traj.jumps.size()) - 1;
    if (N < 1) throw std::invalid_argument("weak-form check needs at least one step");
    const double dt = traj.dt;
    const double alpha = p.alpha;
    const Eigen::VectorXd& mu = sys.weights();
    const double pi = std::acos(-1.0);

    // profiles g_n for n = 1..N+1
    std::vector<std::vector<double>> profiles(2, std::vector<double>(N + 2, 0.0));
    for (int n = 1; n <= N + 1; ++n) {
        if (periodic) {
            profiles[0][n] = std::cos(2.0 * pi * (n - 1) / N);
            profiles[1][n] = std::sin(2.0 * pi * (n - 1) / N);
        } else {
            const double tau = static_cast<double>(n) / (N + 1);
            profiles[0][n] = std::sin(pi * tau);
            profiles[1][n] = std::sin(2.0 * pi * tau);
        }
    }
    if (!periodic) {
        for (auto& g : profiles) g[N + 1] = 0.0;
    }

    const int nw = sys.size();
    const auto rows0 = sys.rows(sys.state(traj.jumps[1], traj.times[1]));
    const std::size_t P = profiles.size();
    std::vector<Eigen::VectorXd> macro(P, Eigen::VectorXd::Zero(rows0.macro.size()));
    std::vector<Eigen::VectorXd> macro_abs = macro;
    std::vector<Eigen::VectorXd> cell(P, Eigen::VectorXd::Zero(rows0.cell.size()));
    std::vector<Eigen::VectorXd> cell_abs = cell;
    std::vector<Eigen::VectorXd> jump(P, Eigen::VectorXd::Zero(nw));
    std::vector<Eigen::VectorXd> jump_abs = jump;

    for (int n = 1; n <= N; ++n) {
        const Eigen::VectorXd& w = traj.jumps[n];
        const auto r = sys.rows(sys.state(w, traj.times[n]));
        Eigen::VectorXd fw(nw);
        for (int i = 0; i < nw; ++i) fw[i] = mu[i] * f(w[i]);
        for (std::size_t k = 0; k < P; ++k) {
            const auto& g = profiles[k];
            const double c = dt * g[n];
            macro[k] += c * r.macro;
            macro_abs[k] += std::abs(c) * r.macro_scale;
            cell[k] += c * r.cell;
            cell_abs[k] += std::abs(c) * r.cell_scale;
            const Eigen::VectorXd time_term =
                alpha * mu.cwiseProduct(w) * (g[n + 1] - g[n]);
            jump[k] += c * (fw - r.flux) - time_term;
            jump_abs[k] += std::abs(c) * (fw.cwiseAbs() + r.flux.cwiseAbs()) + time_term.cwiseAbs();
        }
    }
    if (!periodic) {
        const Eigen::VectorXd init = alpha * mu.cwiseProduct(traj.jumps[0]);
        for (std::size_t k = 0; k < P; ++k) {
            jump[k] -= init * profiles[k][1];
            jump_abs[k] += (init * profiles[k][1]).cwiseAbs();
        }
    }

    WeakFormReport rep;
    auto worst = [&rep](const Eigen::VectorXd& v, const Eigen::VectorXd& s) {
        double m = 0.0;
        for (int i = 0; i < v.size(); ++i) {
            ++rep.pairs;
            if (s[i] > 0.0) m = std::max(m, std::abs(v[i]) / s[i]);
        }
        return m;
    };
    for (std::size_t k = 0; k < P; ++k) {
        rep.max_macro = std::max(rep.max_macro, worst(macro[k], macro_abs[k]));
        rep.max_cell = std::max(rep.max_cell, worst(cell[k], cell_abs[k]));
        rep.max_jump = std::max(rep.max_jump, worst(jump[k], jump_abs[k]));
    }
    return rep;
}

double micro_two_scale_error(const MicroSystem& micro, const Eigen::VectorXd& w_micro,
                             const TwoScaleSystem& macro, const Eigen::VectorXd& w_macro,
                             double t) {
    const Grid& g = micro.domain().grid;
    const Eigen::VectorXd u = micro.bulk_values(w_micro, micro.boundary().temporal_value(t));
    const Eigen::VectorXd U = macro.macro_values(w_macro, macro.boundary().temporal_value(t));
    double s = 0.0;
    for (int c = 0; c < g.cell_count(); ++c) {
        const double d = u[c] - macro.mesh().interpolate(U, g.center(c));
        s += d * d;
    }
    return std::sqrt(g.cell_volume() * s);
}

OrbitEnergyBound orbit_energy_bound(const TwoScaleSystem& sys, const Nonlinearity& f,
                                    const SolverParams& p, const PeriodicOrbit& orbit,
                                    double lambda1, double lambda2) {
    const EnergyReport rep = verify_energy_estimates(sys, f, p, orbit, lambda1, lambda2);
    return {2.0 * rep.gradient_lhs, 2.0 * rep.gradient_rhs};
}

}  // namespace tissue
