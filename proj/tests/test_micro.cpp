#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "tissue/errors.hpp"
#include "tissue/micro_solver.hpp"

using namespace tissue;

namespace {

struct Setup {
    CellGeometry cell;
    EpsilonDomain dom;
    Conductivity sigma{2.0, 1.0};
    BoundaryData psi;

    explicit Setup(double eps = 0.5, int m = 8, int dim = 2)
        : cell(build_cell_geometry(0.25, m, dim)), dom(tile_domain(cell, eps)) {}
};

Eigen::MatrixXd dense(const Eigen::SparseMatrix<double>& a) { return Eigen::MatrixXd(a); }

double max_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

TEST_CASE("1D cell operator matches the hand-assembled tridiagonal") {
    Setup s(1.0, 4, 1);
    const auto op = assemble_bulk(s.dom, s.sigma);
    const double tm = 1.0 / 0.1875;
    Eigen::Matrix4d ref;
    ref << 8 + tm, -tm, 0, 0,
           -tm, tm + 8, -8, 0,
           0, -8, 8 + tm, -tm,
           0, 0, -tm, tm + 8;
    CHECK((dense(op.matrix) - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("bulk operator: symmetry and agreement with the dense traversal") {
    for (int dim : {1, 2}) {
        Setup s(0.5, 8, dim);
        const auto op = assemble_bulk(s.dom, s.sigma);
        const Eigen::MatrixXd A = dense(op.matrix);
        CHECK((A - A.transpose()).cwiseAbs().maxCoeff() < 1e-14);
        const auto o = oracle::assemble(s.dom, s.sigma, s.psi);
        CHECK((A - o.A).cwiseAbs().maxCoeff() < 1e-12);
        Eigen::MatrixXd B(op.cells(), op.facets());
        for (int k = 0; k < op.facets(); ++k) {
            B.col(k) = op.jump_rhs(Eigen::VectorXd::Unit(op.facets(), k));
        }
        CHECK((B - o.B).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((op.data_rhs(s.psi) - o.bpsi).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("homogeneous medium reproduces affine data exactly") {
    Setup s(0.25, 8);
    s.sigma = {1.0, 1.0};
    s.psi.spatial = BoundaryData::Spatial::kAffine;
    s.psi.temporal = BoundaryData::Temporal::kConstant;
    const auto op = assemble_bulk(s.dom, s.sigma);
    const auto st = elliptic_solve_given_jump(op, Eigen::VectorXd::Zero(op.facets()), s.psi, 0.0);
    double err = 0.0;
    for (int c = 0; c < op.cells(); ++c) err = std::max(err, std::abs(st.u[c] - s.dom.grid.center(c)[0]));
    CHECK(err < 1e-12);
}

TEST_CASE("constant data and zero jump give a constant state") {
    Setup s(0.25, 8);
    s.psi.spatial = BoundaryData::Spatial::kConstant;
    s.psi.temporal = BoundaryData::Temporal::kConstant;
    s.psi.amplitude = 3.0;
    const auto op = assemble_bulk(s.dom, s.sigma);
    const auto st = elliptic_solve_given_jump(op, Eigen::VectorXd::Zero(op.facets()), s.psi, 0.3);
    CHECK(max_abs(st.u.array() - 3.0) < 1e-13);
    CHECK(max_abs(st.q) < 1e-12);
}

TEST_CASE("flux from a jump on one inclusion matches the dense direct solve") {
    Setup s(0.5, 8);
    s.psi.amplitude = 0.0;
    const auto op = assemble_bulk(s.dom, s.sigma);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(op.facets());
    // all facets of the inclusion containing the first facet's inner cell
    const auto c0 = s.dom.grid.center(s.dom.facets[0].inner);
    for (int k = 0; k < op.facets(); ++k) {
        const auto c = s.dom.grid.center(s.dom.facets[k].inner);
        if (std::floor(c[0] / 0.5) == std::floor(c0[0] / 0.5) &&
            std::floor(c[1] / 0.5) == std::floor(c0[1] / 0.5)) {
            w[k] = 0.7;
        }
    }
    const auto st = elliptic_solve_given_jump(op, w, s.psi, 0.0);
    const auto o = oracle::assemble(s.dom, s.sigma, s.psi);
    const Eigen::VectorXd u = o.A.fullPivLu().solve(o.B * w);
    const Eigen::VectorXd q = (o.D * u - w) / o.R;
    CHECK(max_abs(st.q - q) < 1e-10);
    CHECK(st.flux_residual < 1e-8);
    CHECK(st.trace_defect < 1e-12);

    // a nonuniform jump produces nonzero flux
    Eigen::VectorXd w2 = Eigen::VectorXd::LinSpaced(op.facets(), -1.0, 1.0);
    const auto st2 = elliptic_solve_given_jump(op, w2, s.psi, 0.0);
    const Eigen::VectorXd u2 = o.A.fullPivLu().solve(o.B * w2);
    CHECK(max_abs(st2.q - (o.D * u2 - w2) / o.R) < 1e-10);
    CHECK(max_abs(st2.q) > 1e-3);
}

TEST_CASE("superposition of data and jumps") {
    Setup s(0.5, 8);
    const auto op = assemble_bulk(s.dom, s.sigma);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd w1(op.facets()), w2(op.facets());
    for (int k = 0; k < op.facets(); ++k) {
        w1[k] = u(rng);
        w2[k] = u(rng);
    }
    BoundaryData p1 = s.psi, p2 = s.psi, p12 = s.psi;
    p1.amplitude = 0.4;
    p2.amplitude = 1.1;
    p12.amplitude = 1.5;
    const double t = 0.3;
    const auto a = elliptic_solve_given_jump(op, w1, p1, t);
    const auto b = elliptic_solve_given_jump(op, w2, p2, t);
    const auto c = elliptic_solve_given_jump(op, w1 + w2, p12, t);
    CHECK(max_abs(a.u + b.u - c.u) < 1e-10);
    CHECK(max_abs(a.q + b.q - c.q) < 1e-10);
}

TEST_CASE("Schur operator is mu-symmetric PSD and matches its matrix-free form") {
    Setup s(0.5, 8);
    const MicroSystem dense_sys(s.dom, s.sigma, s.psi);
    const MicroSystem free_sys(s.dom, s.sigma, s.psi, 0);
    REQUIRE(dense_sys.dense_schur());
    REQUIRE_FALSE(free_sys.dense_schur());
    const int nf = dense_sys.size();
    Eigen::MatrixXd S(nf, nf), Sf(nf, nf);
    Eigen::VectorXd col(nf);
    for (int k = 0; k < nf; ++k) {
        dense_sys.apply_schur(Eigen::VectorXd::Unit(nf, k), col);
        S.col(k) = col;
        free_sys.apply_schur(Eigen::VectorXd::Unit(nf, k), col);
        Sf.col(k) = col;
    }
    CHECK((S - Sf).cwiseAbs().maxCoeff() < 1e-10);
    const auto o = oracle::assemble(s.dom, s.sigma, s.psi);
    CHECK((S - oracle::schur(o)).cwiseAbs().maxCoeff() < 1e-9);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()));
    CHECK(es.eigenvalues().minCoeff() > -1e-9);
    // uniform jump on every inclusion is in the kernel
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(nf);
    dense_sys.apply_schur(ones, col);
    CHECK(max_abs(col) < 1e-9);
}

TEST_CASE("zero data and zero jump stay exactly zero") {
    Setup s(0.5, 8);
    s.psi.amplitude = 0.0;
    const MicroSystem sys(s.dom, s.sigma, s.psi);
    const auto f = make_nonlinearity("sine");
    SolverParams p;
    const Eigen::VectorXd w0 = Eigen::VectorXd::Zero(sys.size());
    const auto r = step(sys, f, p, w0, p.dt);
    CHECK(max_abs(r.w) == 0.0);
    const auto st = sys.state(r.w, p.dt);
    CHECK(max_abs(st.u) == 0.0);
}

TEST_CASE("linear step equals the dense monolithic update") {
    for (int dim : {1, 2}) {
        Setup s(0.5, 8, dim);
        const MicroSystem sys(s.dom, s.sigma, s.psi);
        const auto o = oracle::assemble(s.dom, s.sigma, s.psi);
        const double kappa = 1.3;
        const auto f = make_nonlinearity("linear", kappa);
        SolverParams p;
        p.alpha = 0.8;
        Eigen::VectorXd w = initial_jump_micro({InitialJump::Kind::kSmooth, 1.0, 1}, s.dom);
        for (int n = 0; n < 20; ++n) {
            const double t = (n + 1) * p.dt * 7.0;
            SolverParams pp = p;
            pp.dt = 7e-3;
            const auto r = step(sys, f, pp, w, t);
            const auto [u_ref, w_ref] = oracle::linear_step(o, pp.alpha, kappa, s.dom.epsilon, pp.dt,
                                                            s.psi.temporal_value(t), w);
            CHECK(max_abs(r.w - w_ref) <= 1e-10 * std::max(1.0, max_abs(w_ref)));
            const auto st = sys.state(r.w, t);
            CHECK(max_abs(st.u - u_ref) <= 1e-10 * std::max(1.0, max_abs(u_ref)));
            w = r.w;
        }
    }
}

TEST_CASE("constant data: long run relaxes to the constant state") {
    Setup s(0.5, 8);
    s.psi.spatial = BoundaryData::Spatial::kConstant;
    s.psi.temporal = BoundaryData::Temporal::kConstant;
    s.psi.amplitude = 2.0;
    const MicroSystem sys(s.dom, s.sigma, s.psi);
    const auto f = make_nonlinearity("sine");
    SolverParams p;
    p.dt = 0.01;
    const Eigen::VectorXd w0 = initial_jump_micro({InitialJump::Kind::kRandom, 3.0, 5}, s.dom);
    const auto tr = simulate(sys, f, p, w0, 3000, 3000);
    const Eigen::VectorXd& w = tr.jumps.back();
    CHECK(max_abs(w) < 1e-8);
    const auto st = sys.state(w, tr.times.back());
    CHECK(max_abs(st.u.array() - 2.0) < 1e-8);
}

TEST_CASE("dissipation identity") {
    Setup s(0.5, 8);
    const MicroSystem sys(s.dom, s.sigma, s.psi);
    SolverParams p;
    const Eigen::VectorXd wa = initial_jump_micro({InitialJump::Kind::kRandom, 2.0, 11}, s.dom);
    const Eigen::VectorXd wb = initial_jump_micro({InitialJump::Kind::kRandom, 2.0, 12}, s.dom);

    SUBCASE("zero difference") {
        const auto f = make_nonlinearity("sine");
        const auto d = dissipation_identity(sys, f, p, wa, wa, wa, wa);
        CHECK(d.bulk_term == 0.0);
        CHECK(d.membrane_storage_delta == 0.0);
        CHECK(d.membrane_dissipation == 0.0);
    }
    SUBCASE("linear f against dense quadratic forms") {
        const double kappa = 1.0;
        const auto f = make_nonlinearity("linear", kappa);
        const auto o = oracle::assemble(s.dom, s.sigma, s.psi);
        const auto ra = step(sys, f, p, wa, p.dt);
        const auto rb = step(sys, f, p, wb, p.dt);
        const auto d = dissipation_identity(sys, f, p, wa, wb, ra.w, rb.w);
        const Eigen::VectorXd r1 = ra.w - rb.w;
        const Eigen::VectorXd r0 = wa - wb;
        const double eps = s.dom.epsilon;
        const double mu = s.dom.grid.face_measure();
        const double bulk = p.dt * oracle::energy(o, s.dom, s.sigma, s.psi, 0.0, r1);
        const double storage = 0.5 * p.alpha / eps * mu * (r1.squaredNorm() - r0.squaredNorm());
        const double diss = p.dt * mu * kappa / eps * r1.squaredNorm();
        CHECK(std::abs(d.bulk_term - bulk) <= 1e-10 * std::max(1.0, std::abs(bulk)));
        CHECK(std::abs(d.membrane_storage_delta - storage) <= 1e-10 * std::max(1.0, std::abs(storage)));
        CHECK(std::abs(d.membrane_dissipation - diss) <= 1e-10 * std::max(1.0, std::abs(diss)));
    }
    SUBCASE("sum is nonpositive along an s + sin s run") {
        const auto f = make_nonlinearity("sine");
        Eigen::VectorXd a = wa, b = wb;
        for (int n = 0; n < 200; ++n) {
            const double t = (n + 1) * p.dt;
            const auto ra = step(sys, f, p, a, t);
            const auto rb = step(sys, f, p, b, t);
            const auto d = dissipation_identity(sys, f, p, a, b, ra.w, rb.w);
            CHECK(d.sum() <= 1e-10);
            a = ra.w;
            b = rb.w;
        }
    }
}

TEST_CASE("per-step contracts along a run") {
    Setup s(0.25, 8);
    const MicroSystem sys(s.dom, s.sigma, s.psi);
    for (const char* kind : {"linear", "sine", "cubic", "tanh"}) {
        const auto f = make_nonlinearity(kind);
        SolverParams p;
        const Eigen::VectorXd a0 = initial_jump_micro({InitialJump::Kind::kRandom, 5.0, 21}, s.dom);
        const Eigen::VectorXd b0 = initial_jump_micro({InitialJump::Kind::kRandom, 5.0, 22}, s.dom);
        const auto ta = simulate(sys, f, p, a0, 100);
        const auto tb = simulate(sys, f, p, b0, 100);
        double e_prev = lyapunov_value(sys, p, a0, b0);
        for (std::size_t k = 1; k < ta.jumps.size(); ++k) {
            const double e = lyapunov_value(sys, p, ta.jumps[k], tb.jumps[k]);
            CHECK(e <= e_prev + 1e-10);
            e_prev = e;
            CHECK(std::abs(ta.energy_residual[k]) < 1e-9);
        }
        const auto st = sys.state(ta.jumps.back(), ta.times.back());
        CHECK(st.flux_residual < 1e-8);
        CHECK(st.trace_defect < 1e-12);
    }
}

TEST_CASE("Newton residuals contract once small") {
    Setup s(0.25, 8);
    const MicroSystem sys(s.dom, s.sigma, s.psi);
    const auto f = make_nonlinearity("cubic");
    SolverParams p;
    p.dt = 0.05;
    Eigen::VectorXd w = initial_jump_micro({InitialJump::Kind::kRandom, 5.0, 2}, s.dom);
    for (int n = 0; n < 20; ++n) {
        const auto r = step(sys, f, p, w, (n + 1) * p.dt);
        for (std::size_t i = 1; i < r.residuals.size(); ++i) {
            if (r.residuals[i - 1] < 1e-3 && r.residuals[i - 1] > 1e-13) {
                CHECK(r.residuals[i] < 0.5 * r.residuals[i - 1]);
            }
        }
        w = r.w;
    }
}

TEST_CASE("negating data and initial jump negates the trajectory") {
    Setup s(0.25, 8);
    BoundaryData neg = s.psi;
    neg.amplitude = -s.psi.amplitude;
    const MicroSystem sys(s.dom, s.sigma, s.psi);
    const MicroSystem sys_neg(s.dom, s.sigma, neg);
    SolverParams p;
    const Eigen::VectorXd w0 = initial_jump_micro({InitialJump::Kind::kRandom, 3.0, 9}, s.dom);
    for (const char* kind : {"sine", "cubic", "tanh"}) {
        const auto f = make_nonlinearity(kind);
        const auto a = simulate(sys, f, p, w0, 200, 50);
        const auto b = simulate(sys_neg, f, p, -w0, 200, 50);
        for (std::size_t k = 0; k < a.jumps.size(); ++k) {
            CHECK(max_abs(a.jumps[k] + b.jumps[k]) < 1e-10);
            const auto ua = sys.bulk_values(a.jumps[k], s.psi.temporal_value(a.times[k]));
            const auto ub = sys_neg.bulk_values(b.jumps[k], s.psi.temporal_value(b.times[k]));
            CHECK(max_abs(ua + ub) < 1e-10);
        }
    }
}

TEST_CASE("common-factor scaling leaves linear trajectories unchanged") {
    Setup s(0.25, 8);
    const double c = 3.7;
    const MicroSystem sys(s.dom, s.sigma, s.psi);
    const MicroSystem sys_c(s.dom, {c * s.sigma.inner, c * s.sigma.outer}, s.psi);
    SolverParams p;
    SolverParams pc = p;
    pc.alpha = c * p.alpha;
    const auto f = make_nonlinearity("linear", 1.0);
    const auto fc = make_nonlinearity("linear", c);
    const Eigen::VectorXd w0 = initial_jump_micro({InitialJump::Kind::kSmooth, 2.0, 1}, s.dom);
    const auto a = simulate(sys, f, p, w0, 200, 50);
    const auto b = simulate(sys_c, fc, pc, w0, 200, 50);
    for (std::size_t k = 0; k < a.jumps.size(); ++k) {
        CHECK(max_abs(a.jumps[k] - b.jumps[k]) < 1e-10);
        const double pt = s.psi.temporal_value(a.times[k]);
        CHECK(max_abs(sys.bulk_values(a.jumps[k], pt) - sys_c.bulk_values(b.jumps[k], pt)) < 1e-10);
    }
}

TEST_CASE("scaled initial data bound") {
    Setup s(0.25, 8);
    for (auto kind : {InitialJump::Kind::kUniform, InitialJump::Kind::kSmooth, InitialJump::Kind::kRandom}) {
        const InitialJump S{kind, 2.0, 4};
        const Eigen::VectorXd se = initial_jump_micro(S, s.dom);
        const double integral = s.dom.grid.face_measure() * se.squaredNorm();
        // max |S| over the built-in family: A (1+x)(|p| + |mean p|) <= A * 2 * 4
        const double smax = kind == InitialJump::Kind::kSmooth ? 2.0 * 2.0 * 4.0 : 2.0;
        const double gamma = s.cell.membrane_measure * 1.0 * smax * smax;
        CHECK(integral <= gamma * s.dom.epsilon);
    }
}

TEST_CASE("zero initial data and zero forcing give a zero trajectory") {
    Setup s(0.25, 8);
    s.psi.amplitude = 0.0;
    const MicroSystem sys(s.dom, s.sigma, s.psi);
    SolverParams p;
    const auto tr = simulate(sys, make_nonlinearity("cubic"), p,
                             initial_jump_micro({InitialJump::Kind::kZero, 1.0, 1}, s.dom), 50, 10);
    for (std::size_t k = 0; k < tr.jumps.size(); ++k) {
        CHECK(max_abs(tr.jumps[k]) == 0.0);
        for (double v : sys.norms(tr.jumps[k], 0.0)) CHECK(v == 0.0);
    }
}

TEST_CASE("stability and Poincare bounds hold for data-free states") {
    Setup s(0.5, 8);
    const MicroSystem sys(s.dom, s.sigma, s.psi);
    const double C = sys.stability_constant();
    const double CP = sys.poincare_constant();
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd r(sys.size());
        for (int k = 0; k < sys.size(); ++k) r[k] = u(rng);
        if (trial == 0) r.setOnes();
        const auto nrm = sys.norms(r, 0.0);
        CHECK(nrm[1] <= C * nrm[2] * (1 + 1e-12));
        CHECK(nrm[0] <= CP * (nrm[1] + nrm[2]));
    }
}
