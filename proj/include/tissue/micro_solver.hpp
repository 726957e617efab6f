#pragma once

#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "tissue/boundary_data.hpp"
#include "tissue/geometry.hpp"
#include "tissue/membrane.hpp"

namespace tissue {

/// Cell-centered finite volume operator on the tiled domain.
///
/// Same-phase faces carry sigma h^(N-2); membrane faces carry h^(N-1)/R with the series
/// resistance R of the two half-cells and the jump w on the right-hand side; faces on
/// dOmega carry 2 sigma h^(N-2) against the data at the face midpoint.
struct BulkOperator {
    struct Face {
        int p = 0;
        int q = 0;
        double transmissibility = 0.0;
    };
    struct BoundaryFace {
        int cell = 0;
        std::array<double, 2> midpoint{0.0, 0.0};
        double transmissibility = 0.0;
    };

    EpsilonDomain domain;
    Conductivity sigma;
    Eigen::SparseMatrix<double> matrix;
    std::vector<Face> faces;  // same-phase interior faces
    std::vector<BoundaryFace> boundary;
    double membrane_resistance = 0.0;        // R
    double membrane_transmissibility = 0.0;  // h^(N-1)/R
    std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> factor;

    int cells() const { return domain.grid.cell_count(); }
    int facets() const { return domain.membrane_unknowns(); }
    /// T_m D^T w: bulk right-hand side produced by the membrane jump.
    Eigen::VectorXd jump_rhs(const Eigen::VectorXd& w) const;
    /// D u: outer minus inner cell value per facet.
    Eigen::VectorXd facet_difference(const Eigen::VectorXd& u) const;
    /// Bulk right-hand side of the data amplitude * psi_s (psi_t = 1).
    Eigen::VectorXd data_rhs(const BoundaryData& psi) const;
    /// Solves matrix * u = rhs; throws SolverError above 1e-10 relative residual.
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
};

BulkOperator assemble_bulk(const EpsilonDomain& domain, const Conductivity& sigma);

struct MicroState {
    double t = 0.0;
    Eigen::VectorXd u;            // bulk cell values
    Eigen::VectorXd inner_trace;  // u^(1) per facet
    Eigen::VectorXd outer_trace;  // u^(2) per facet
    Eigen::VectorXd w;            // jump u^(2) - u^(1)
    Eigen::VectorXd q;            // sigma grad u . nu per facet
    double flux_residual = 0.0;   // max |one-sided flux difference|
    double trace_defect = 0.0;    // max |u2 - u1 - w|
};

/// Bulk state for a prescribed jump w and data Psi(., t).
MicroState elliptic_solve_given_jump(const BulkOperator& op, const Eigen::VectorXd& w,
                                     const BoundaryData& psi, double t);

/// Jump dynamics of the micro problem with length scale eps.
class MicroSystem final : public MembraneSystem {
public:
    /// S is cached densely up to `dense_limit` facets and applied through the bulk solve
    /// beyond that.
    MicroSystem(const EpsilonDomain& domain, const Conductivity& sigma, const BoundaryData& psi,
                int dense_limit = 4096);

    int size() const override { return op_.facets(); }
    const Eigen::VectorXd& weights() const override { return mu_; }
    double length_scale() const override { return op_.domain.epsilon; }
    const BoundaryData& boundary() const override { return psi_; }
    void apply_schur(const Eigen::VectorXd& w, Eigen::VectorXd& out) const override;
    const Eigen::VectorXd& schur_diagonal() const override { return diag_; }
    const Eigen::VectorXd& forcing_shape() const override { return q0_; }
    std::vector<std::string> norm_names() const override;
    std::vector<double> norms(const Eigen::VectorXd& w, double psi_t) const override;
    double energy(const Eigen::VectorXd& w, double psi_t) const override;
    double data_energy() const override { return data_energy_; }

    const BulkOperator& bulk() const { return op_; }
    const EpsilonDomain& domain() const { return op_.domain; }
    bool dense_schur() const { return schur_.has_value(); }
    /// Bulk values for jump w and data scaled by psi_t.
    Eigen::VectorXd bulk_values(const Eigen::VectorXd& w, double psi_t) const;
    /// Facet fluxes q for bulk values u and jump w.
    Eigen::VectorXd facet_flux(const Eigen::VectorXd& u, const Eigen::VectorXd& w) const;
    MicroState state(const Eigen::VectorXd& w, double t) const;

    /// Bound C with |grad u_r| <= C |r|_mu for the data-free state of jump r.
    double stability_constant() const;
    /// Bound C_P with |u_r|_L2 <= C_P (|grad u_r| + |r|_mu), from a power iteration.
    double poincare_constant(int iterations = 200) const;

private:
    double energy_of(const Eigen::VectorXd& u, const Eigen::VectorXd& w, double psi_t) const;

    BulkOperator op_;
    BoundaryData psi_;
    Eigen::VectorXd mu_;
    Eigen::VectorXd diag_;
    Eigen::VectorXd rhs_shape_;
    Eigen::VectorXd q0_;
    std::vector<double> boundary_values_;  // amplitude * psi_s at boundary face midpoints
    std::optional<Eigen::MatrixXd> schur_;
    double data_energy_ = 0.0;
};

}  // namespace tissue
