#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tissue/errors.hpp"
#include "tissue/micro_solver.hpp"
#include "tissue/periodic_solver.hpp"

using namespace tissue;

namespace {

double max_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

struct Small {
    CellGeometry cell = build_cell_geometry(0.25, 8);
    EpsilonDomain dom = tile_domain(cell, 0.5);
    Conductivity sigma{2.0, 1.0};
    BoundaryData psi;
};

}  // namespace

TEST_CASE("constant data: zero jump is a fixed point of the period map") {
    Small s;
    s.psi.spatial = BoundaryData::Spatial::kConstant;
    s.psi.temporal = BoundaryData::Temporal::kConstant;
    s.psi.amplitude = 1.7;
    const MicroSystem sys(s.dom, s.sigma, s.psi);
    SolverParams p;
    p.dt = 0.01;
    const auto f = make_nonlinearity("sine");
    const Eigen::VectorXd z = Eigen::VectorXd::Zero(sys.size());
    CHECK(max_abs(poincare_map(sys, f, p, z)) == 0.0);
    const auto orb = find_periodic(sys, f, p, z);
    CHECK(orb.defect == 0.0);
    for (const auto& w : orb.orbit.jumps) CHECK(max_abs(w) == 0.0);
    const auto st = sys.state(orb.start(), 0.0);
    CHECK(max_abs(st.u.array() - 1.7) < 1e-13);
}

TEST_CASE("linear f: period map and fixed point against the dense monodromy") {
    Small s;
    const MicroSystem sys(s.dom, s.sigma, s.psi);
    const auto o = oracle::assemble(s.dom, s.sigma, s.psi);
    const double kappa = 1.0;
    const auto f = make_nonlinearity("linear", kappa);
    SolverParams p;
    p.dt = 0.005;
    const int steps = p.steps_per_period();
    const auto ref = oracle::monodromy(o, p.alpha, kappa, s.dom.epsilon, p.dt, steps, s.psi);
    const int nf = sys.size();

    const Eigen::VectorXd p0 = poincare_map(sys, f, p, Eigen::VectorXd::Zero(nf));
    CHECK(max_abs(p0 - ref.b) <= 1e-8 * std::max(1.0, max_abs(ref.b)));
    Eigen::MatrixXd M(nf, nf);
    for (int k = 0; k < nf; ++k) {
        M.col(k) = poincare_map(sys, f, p, Eigen::VectorXd::Unit(nf, k)) - p0;
    }
    CHECK((M - ref.M).cwiseAbs().maxCoeff() <= 1e-8);

    const Eigen::VectorXd wstar =
        (Eigen::MatrixXd::Identity(nf, nf) - ref.M).fullPivLu().solve(ref.b);
    PicardOptions opts;
    opts.tol = 1e-11;
    const auto orb = find_periodic(sys, f, p, Eigen::VectorXd::Zero(nf), opts);
    CHECK(max_abs(orb.start() - wstar) <= 1e-8 * std::max(1.0, max_abs(wstar)));
    CHECK(orb.defect_monotone);
}

TEST_CASE("period map contracts for coercive f") {
    Small s;
    const MicroSystem sys(s.dom, s.sigma, s.psi);
    SolverParams p;
    p.dt = 0.005;
    for (const char* kind : {"linear", "tanh", "cubic"}) {
        const auto f = make_nonlinearity(kind);
        const Eigen::VectorXd a = initial_jump_micro({InitialJump::Kind::kRandom, 2.0, 1}, s.dom);
        const Eigen::VectorXd b = initial_jump_micro({InitialJump::Kind::kRandom, 2.0, 2}, s.dom);
        const double q = sys.weighted_norm(poincare_map(sys, f, p, a) - poincare_map(sys, f, p, b)) /
                         sys.weighted_norm(a - b);
        CHECK(q < 1.0);
    }
}

TEST_CASE("noncoercive f: Picard converges with nonincreasing defects") {
    Small s;
    const MicroSystem sys(s.dom, s.sigma, s.psi);
    const auto f = make_nonlinearity("sine");
    SolverParams p;
    const Eigen::VectorXd w0 = initial_jump_micro({InitialJump::Kind::kSmooth, 1.0, 1}, s.dom);
    const auto orb = find_periodic(sys, f, p, w0);
    CHECK(orb.defect <= 1e-8);
    CHECK(orb.defect_monotone);
    for (std::size_t i = 1; i < orb.defects.size(); ++i) {
        CHECK(orb.defects[i] <= orb.defects[i - 1] * (1.0 + 1e-9) + 1e-15);
    }

    SUBCASE("time-shift consistency") {
        const auto again = simulate(sys, f, p, orb.orbit.jumps.back(), orb.steps(), 1, 1.0);
        for (std::size_t k = 0; k < again.jumps.size(); ++k) {
            CHECK(sys.weighted_norm(again.jumps[k] - orb.orbit.jumps[k]) <= 1e-8);
        }
    }
    SUBCASE("uniqueness probe") {
        const Eigen::VectorXd w1 = initial_jump_micro({InitialJump::Kind::kRandom, 4.0, 8}, s.dom);
        const auto other = find_periodic(sys, f, p, w1);
        CHECK(sys.weighted_norm(other.start() - orb.start()) <= 10.0 * 1e-8);
    }
}

TEST_CASE("Picard reports failure with the defect history") {
    Small s;
    const MicroSystem sys(s.dom, s.sigma, s.psi);
    SolverParams p;
    p.dt = 0.01;
    PicardOptions opts;
    opts.max_iters = 2;
    opts.tol = 1e-14;
    try {
        find_periodic(sys, make_nonlinearity("sine"), p,
                      initial_jump_micro({InitialJump::Kind::kRandom, 4.0, 8}, s.dom), opts);
        FAIL("expected failure");
    } catch (const SolverError& e) {
        CHECK(e.history().size() == 2);
    }
}

TEST_CASE("delta sequence") {
    Small s;
    const MicroSystem sys(s.dom, s.sigma, s.psi);
    SolverParams p;
    p.dt = 0.005;
    const Eigen::VectorXd w0 = Eigen::VectorXd::Zero(sys.size());

    SUBCASE("noncoercive f: orbit differences decrease and approach the direct orbit") {
        const auto f = make_nonlinearity("sine");
        const auto reg = find_periodic_regularized(sys, f, p, {0.1, 0.01, 0.001}, w0);
        REQUIRE(reg.differences.size() == 2);
        CHECK(reg.differences[1] < reg.differences[0]);
        const auto direct = find_periodic(sys, f, p, reg.orbits.back().start());
        CHECK(orbit_difference(sys, reg.orbits.back(), direct) < 1e-4);
    }
    SUBCASE("linear f: regularized orbit equals the kappa+delta orbit") {
        const auto f = make_nonlinearity("linear", 1.0);
        const auto reg = find_periodic_regularized(sys, f, p, {0.5, 0.05}, w0);
        const auto o = oracle::assemble(s.dom, s.sigma, s.psi);
        for (std::size_t i = 0; i < reg.deltas.size(); ++i) {
            const auto ref = oracle::monodromy(o, p.alpha, 1.0 + reg.deltas[i], s.dom.epsilon, p.dt,
                                               p.steps_per_period(), s.psi);
            const int nf = sys.size();
            const Eigen::VectorXd wstar =
                (Eigen::MatrixXd::Identity(nf, nf) - ref.M).fullPivLu().solve(ref.b);
            CHECK(max_abs(reg.orbits[i].start() - wstar) <= 1e-8 * std::max(1.0, max_abs(wstar)));
        }
    }
    SUBCASE("invalid sequences are rejected") {
        const auto f = make_nonlinearity("sine");
        CHECK_THROWS(find_periodic_regularized(sys, f, p, {0.01, 0.1}, w0));
        CHECK_THROWS(find_periodic_regularized(sys, f, p, {1e-7}, w0));
    }
}

TEST_CASE("energy estimates over a period") {
    Small s;
    SolverParams p;
    p.dt = 0.005;
    SUBCASE("zero data") {
        BoundaryData zero = s.psi;
        zero.amplitude = 0.0;
        const MicroSystem sys(s.dom, s.sigma, zero);
        const auto f = make_nonlinearity("linear", 1.0);
        const auto orb = find_periodic(sys, f, p, Eigen::VectorXd::Zero(sys.size()));
        const auto rep = verify_energy_estimates(sys, f, p, orb, 1.0, 0.0);
        CHECK(rep.gradient_lhs == 0.0);
        CHECK(rep.gradient_rhs == 0.0);
        CHECK(rep.rate_lhs == 0.0);
        CHECK(rep.pass());
    }
    const MicroSystem sys(s.dom, s.sigma, s.psi);
    for (const char* kind : {"linear", "sine", "cubic"}) {
        CAPTURE(kind);
        const auto f = make_nonlinearity(kind);
        const auto orb = find_periodic(sys, f, p, Eigen::VectorXd::Zero(sys.size()));
        const auto& c = f.certificate();
        const auto rep = verify_energy_estimates(sys, f, p, orb, c.lambda1, c.lambda2);
        CHECK(rep.gradient_margin() > 0.0);
        CHECK(rep.rate_margin() > 0.0);
        // the bound is an identity up to Young and Cauchy-Schwarz, so it cannot be loose by
        // orders of magnitude
        CHECK(rep.gradient_lhs > 1e-3 * rep.gradient_rhs);
    }
}
