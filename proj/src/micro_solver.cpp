#include "tissue/micro_solver.hpp"

#include <cmath>
#include <sstream>

#include "tissue/errors.hpp"

namespace tissue {

namespace {

double pow_h(double h, int e) {
    return e == 0 ? 1.0 : (e == -1 ? 1.0 / h : (e == 1 ? h : std::pow(h, e)));
}

}  // namespace

BulkOperator assemble_bulk(const EpsilonDomain& domain, const Conductivity& sigma) {
    BulkOperator op;
    op.domain = domain;
    op.sigma = sigma;
    const Grid& g = domain.grid;
    const int dim = g.dimension;
    const double h = g.h;
    const double t_scale = pow_h(h, dim - 2);
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
        const bool in = domain.inner[c] != 0;
        for (int axis = 0; axis < dim; ++axis) {
            if (ij[axis] + 1 < g.n) {
                auto nb = ij;
                nb[axis] += 1;
                const int d = g.index(nb[0], nb[1]);
                if ((domain.inner[d] != 0) == in) {
                    const double t = sigma.of(in) * t_scale;
                    op.faces.push_back({c, d, t});
                    couple(c, d, t);
                }
            }
            for (int side = 0; side < 2; ++side) {
                const bool on_edge = side == 0 ? ij[axis] == 0 : ij[axis] == g.n - 1;
                if (!on_edge) continue;
                if (in) throw GeometryError("inclusion touches the outer boundary");
                BulkOperator::BoundaryFace bf;
                bf.cell = c;
                bf.midpoint = g.center(c);
                bf.midpoint[axis] = side == 0 ? 0.0 : 1.0;
                bf.transmissibility = 2.0 * sigma.outer * t_scale;
                trip.emplace_back(c, c, bf.transmissibility);
                op.boundary.push_back(bf);
            }
        }
    }
    for (const auto& f : domain.facets) couple(f.inner, f.outer, op.membrane_transmissibility);

    op.matrix.resize(g.cell_count(), g.cell_count());
    op.matrix.setFromTriplets(trip.begin(), trip.end());
    op.factor = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>(op.matrix);
    if (op.factor->info() != Eigen::Success) {
        throw SolverError("bulk operator factorization failed (singular assembly)");
    }
    return op;
}

Eigen::VectorXd BulkOperator::jump_rhs(const Eigen::VectorXd& w) const {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(cells());
    for (int k = 0; k < facets(); ++k) {
        const auto& f = domain.facets[k];
        rhs[f.outer] += membrane_transmissibility * w[k];
        rhs[f.inner] -= membrane_transmissibility * w[k];
    }
    return rhs;
}

Eigen::VectorXd BulkOperator::facet_difference(const Eigen::VectorXd& u) const {
    Eigen::VectorXd d(facets());
    for (int k = 0; k < facets(); ++k) {
        d[k] = u[domain.facets[k].outer] - u[domain.facets[k].inner];
    }
    return d;
}

Eigen::VectorXd BulkOperator::data_rhs(const BoundaryData& psi) const {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(cells());
    for (const auto& bf : boundary) {
        rhs[bf.cell] += bf.transmissibility * psi.spatial_value(bf.midpoint, domain.grid.dimension);
    }
    return rhs;
}

Eigen::VectorXd BulkOperator::solve(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd u = factor->solve(rhs);
    const double bnorm = rhs.norm();
    if (bnorm > 0.0) {
        const double res = (matrix * u - rhs).norm() / bnorm;
        if (!(res <= 1e-10)) {
            std::ostringstream os;
            os << "bulk solve relative residual " << res << " exceeds 1e-10";
            throw SolverError(os.str(), {res});
        }
    }
    return u;
}

MicroState elliptic_solve_given_jump(const BulkOperator& op, const Eigen::VectorXd& w,
                                     const BoundaryData& psi, double t) {
    if (w.size() != op.facets() || !w.allFinite()) {
        throw std::invalid_argument("jump vector has the wrong size or non-finite entries");
    }
    MicroState s;
    s.t = t;
    s.w = w;
    const double pt = psi.temporal_value(t);
    Eigen::VectorXd rhs = op.jump_rhs(w);
    if (psi.spatially_constant()) {
        s.u = op.solve(rhs).array() + psi.amplitude * pt;
    } else {
        s.u = op.solve(rhs + pt * op.data_rhs(psi));
    }
    const double R = op.membrane_resistance;
    const double h = op.domain.grid.h;
    s.q = (op.facet_difference(s.u) - w) / R;
    s.inner_trace.resize(op.facets());
    s.outer_trace.resize(op.facets());
    for (int k = 0; k < op.facets(); ++k) {
        const auto& f = op.domain.facets[k];
        s.inner_trace[k] = s.u[f.inner] + s.q[k] * h / (2.0 * op.sigma.inner);
        s.outer_trace[k] = s.u[f.outer] - s.q[k] * h / (2.0 * op.sigma.outer);
        const double q_in = op.sigma.inner * (s.inner_trace[k] - s.u[f.inner]) / (0.5 * h);
        const double q_out = op.sigma.outer * (s.u[f.outer] - s.outer_trace[k]) / (0.5 * h);
        s.flux_residual = std::max(s.flux_residual, std::abs(q_in - q_out));
        s.trace_defect =
            std::max(s.trace_defect, std::abs(s.outer_trace[k] - s.inner_trace[k] - w[k]));
    }
    return s;
}

MicroSystem::MicroSystem(const EpsilonDomain& domain, const Conductivity& sigma,
                         const BoundaryData& psi, int dense_limit)
    : op_(assemble_bulk(domain, sigma)), psi_(psi) {
    const int nf = op_.facets();
    const double R = op_.membrane_resistance;
    mu_ = Eigen::VectorXd::Constant(nf, domain.grid.face_measure());

    rhs_shape_ = op_.data_rhs(psi_);
    for (const auto& bf : op_.boundary) {
        boundary_values_.push_back(psi_.spatial_value(bf.midpoint, domain.grid.dimension));
    }
    if (psi_.spatially_constant()) {
        q0_ = Eigen::VectorXd::Zero(nf);
    } else {
        q0_ = op_.facet_difference(op_.solve(rhs_shape_)) / R;
    }

    if (nf <= dense_limit) {
        Eigen::MatrixXd S(nf, nf);
        constexpr int kBlock = 256;
        for (int c0 = 0; c0 < nf; c0 += kBlock) {
            const int nb = std::min(kBlock, nf - c0);
            Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(op_.cells(), nb);
            for (int j = 0; j < nb; ++j) {
                const auto& f = domain.facets[c0 + j];
                rhs(f.outer, j) += op_.membrane_transmissibility;
                rhs(f.inner, j) -= op_.membrane_transmissibility;
            }
            const Eigen::MatrixXd u = op_.factor->solve(rhs);
            for (int j = 0; j < nb; ++j) {
                for (int k = 0; k < nf; ++k) {
                    const auto& f = domain.facets[k];
                    S(k, c0 + j) = -(u(f.outer, j) - u(f.inner, j)) / R;
                }
                S(c0 + j, c0 + j) += 1.0 / R;
            }
        }
        schur_ = 0.5 * (S + S.transpose());
        diag_ = schur_->diagonal();
    } else {
        diag_ = Eigen::VectorXd::Constant(nf, 1.0 / R);
    }

    // interpolant of the data: cell-center values, zero jump
    Eigen::VectorXd interp(op_.cells());
    for (int c = 0; c < op_.cells(); ++c) {
        interp[c] = psi_.spatial_value(domain.grid.center(c), domain.grid.dimension);
    }
    data_energy_ = energy_of(interp, Eigen::VectorXd::Zero(nf), 1.0);
}

void MicroSystem::apply_schur(const Eigen::VectorXd& w, Eigen::VectorXd& out) const {
    if (schur_) {
        out.noalias() = *schur_ * w;
        return;
    }
    const Eigen::VectorXd u = op_.factor->solve(op_.jump_rhs(w));
    out = (w - op_.facet_difference(u)) / op_.membrane_resistance;
}

Eigen::VectorXd MicroSystem::bulk_values(const Eigen::VectorXd& w, double psi_t) const {
    Eigen::VectorXd rhs = op_.jump_rhs(w);
    if (psi_.spatially_constant()) {
        Eigen::VectorXd u = op_.solve(rhs);
        u.array() += psi_.amplitude * psi_t;
        return u;
    }
    return op_.solve(rhs + psi_t * rhs_shape_);
}

Eigen::VectorXd MicroSystem::facet_flux(const Eigen::VectorXd& u, const Eigen::VectorXd& w) const {
    return (op_.facet_difference(u) - w) / op_.membrane_resistance;
}

MicroState MicroSystem::state(const Eigen::VectorXd& w, double t) const {
    return elliptic_solve_given_jump(op_, w, psi_, t);
}

double MicroSystem::energy_of(const Eigen::VectorXd& u, const Eigen::VectorXd& w,
                              double psi_t) const {
    double a = 0.0;
    for (const auto& f : op_.faces) {
        const double d = u[f.q] - u[f.p];
        a += f.transmissibility * d * d;
    }
    for (std::size_t b = 0; b < op_.boundary.size(); ++b) {
        const auto& bf = op_.boundary[b];
        const double d = psi_t * boundary_values_[b] - u[bf.cell];
        a += bf.transmissibility * d * d;
    }
    const Eigen::VectorXd dm = op_.facet_difference(u) - w;
    a += op_.membrane_transmissibility * dm.squaredNorm();
    return a;
}

double MicroSystem::energy(const Eigen::VectorXd& w, double psi_t) const {
    return energy_of(bulk_values(w, psi_t), w, psi_t);
}

std::vector<std::string> MicroSystem::norm_names() const { return {"L2_bulk", "L2_grad", "L2_jump"}; }

std::vector<double> MicroSystem::norms(const Eigen::VectorXd& w, double psi_t) const {
    const Grid& g = op_.domain.grid;
    const int dim = g.dimension;
    const double h = g.h;
    const Eigen::VectorXd u = bulk_values(w, psi_t);
    const double l2 = std::sqrt(g.cell_volume() * u.squaredNorm());

    const double hs = pow_h(h, dim - 2);
    double grad = 0.0;
    for (const auto& f : op_.faces) {
        const double d = u[f.q] - u[f.p];
        grad += hs * d * d;
    }
    for (std::size_t b = 0; b < op_.boundary.size(); ++b) {
        const double d = psi_t * boundary_values_[b] - u[op_.boundary[b].cell];
        grad += 2.0 * hs * d * d;
    }
    const Eigen::VectorXd q = facet_flux(u, w);
    const double s1 = op_.sigma.inner;
    const double s2 = op_.sigma.outer;
    grad += 0.5 * g.cell_volume() * (1.0 / (s1 * s1) + 1.0 / (s2 * s2)) * q.squaredNorm();
    return {l2, std::sqrt(grad), weighted_norm(w)};
}

double MicroSystem::stability_constant() const {
    return 1.0 / std::sqrt(op_.membrane_resistance * op_.sigma.min());
}

double MicroSystem::poincare_constant(int iterations) const {
    const int nf = size();
    if (nf == 0) return 0.0;
    const double vol = op_.domain.grid.cell_volume();
    Eigen::VectorXd x = Eigen::VectorXd::Ones(nf);
    x /= weighted_norm(x);
    double lambda = 0.0;
    for (int it = 0; it < iterations; ++it) {
        const Eigen::VectorXd u = op_.factor->solve(op_.jump_rhs(x));
        const Eigen::VectorXd v = op_.factor->solve(vol * u);
        // mu^-1 L^T W L x with L^T = T_m D A^-1
        Eigen::VectorXd y = op_.membrane_transmissibility * op_.facet_difference(v);
        y = y.cwiseQuotient(mu_);
        lambda = weighted_dot(x, y);
        const double n = weighted_norm(y);
        if (n == 0.0) break;
        x = y / n;
    }
    return 1.05 * std::sqrt(std::max(lambda, 0.0));
}

}  // namespace tissue
