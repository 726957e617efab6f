#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "tissue/boundary_data.hpp"
#include "tissue/geometry.hpp"
#include "tissue/membrane.hpp"
#include "tissue/periodic_solver.hpp"

namespace tissue {

class MicroSystem;

/// Y-periodic finite volume operator of the cell problem
///
///   -div_y(sigma (G + grad_y u1)) = 0,  u1 periodic, [u1] = w on Gamma,
///
/// for a macro gradient G. The face flux of a same-phase face along axis k is
/// T (u_q - u_p + G_k h); a membrane face carries T_m (u_out - u_in + G.nu h - w).
/// The constant kernel is removed by pinning one cell and projecting to zero mean.
struct CellOperator {
    struct Face {
        int p = 0;
        int q = 0;  // p + e_axis, periodically wrapped
        int axis = 0;
        double transmissibility = 0.0;
    };

    CellGeometry cell;
    Conductivity sigma;
    std::vector<Face> faces;
    double membrane_resistance = 0.0;
    double membrane_transmissibility = 0.0;
    Eigen::SparseMatrix<double> matrix;  // singular periodic operator
    std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> pinned;

    // unit responses: corrector and fluxes for G = e_k (w = 0) and w = e_f (G = 0)
    Eigen::MatrixXd response_gradient;  // cells x N
    Eigen::MatrixXd response_jump;      // cells x F
    Eigen::MatrixXd A_hom;              // N x N, J = A_hom G + C w
    Eigen::MatrixXd C;                  // N x F
    Eigen::MatrixXd Q_G;                // F x N, q = Q_G G - S_q w
    Eigen::MatrixXd S_q;                // F x F

    int dimension() const { return cell.dimension; }
    int cells() const { return cell.grid.cell_count(); }
    int facets() const { return static_cast<int>(cell.facets.size()); }

    Eigen::VectorXd rhs(const Eigen::VectorXd& G, const Eigen::VectorXd& w) const;
    /// Zero-mean solution of matrix * u = b for a compatible b.
    Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
    Eigen::VectorXd corrector(const Eigen::VectorXd& G, const Eigen::VectorXd& w) const;
    /// Normal flux q = sigma (G + grad_y u1) . nu per facet.
    Eigen::VectorXd facet_flux(const Eigen::VectorXd& u, const Eigen::VectorXd& G,
                               const Eigen::VectorXd& w) const;
    /// J = int_Y sigma (G + grad_y u1) dy.
    Eigen::VectorXd macro_flux(const Eigen::VectorXd& u, const Eigen::VectorXd& G,
                               const Eigen::VectorXd& w) const;
    /// int_Y sigma |G + grad_y u1|^2 dy.
    double energy(const Eigen::VectorXd& u, const Eigen::VectorXd& G,
                  const Eigen::VectorXd& w) const;
    /// Squared discrete L2 norm of grad_y u1 over Y.
    double gradient_norm2(const Eigen::VectorXd& u, const Eigen::VectorXd& G,
                          const Eigen::VectorXd& w) const;
};

CellOperator assemble_cell_operator(const CellGeometry& cell, const Conductivity& sigma);

/// P1 elements on Omega=(0,1)^N: M intervals in 1D, M x M squares cut into two
/// triangles each in 2D.
struct MacroMesh {
    int dimension = 2;
    int resolution = 4;
    double H = 0.25;
    std::vector<std::array<double, 2>> nodes;
    std::vector<std::array<int, 3>> elements;  // the first N+1 entries are used
    std::vector<double> measure;
    std::vector<std::array<std::array<double, 2>, 3>> gradients;  // per element and vertex
    std::vector<int> interior_index;  // -1 on the boundary
    int interior_count = 0;

    int node_count() const { return static_cast<int>(nodes.size()); }
    int element_count() const { return static_cast<int>(elements.size()); }
    int vertices() const { return dimension + 1; }
    std::array<double, 2> centroid(int e) const;
    /// Value of the P1 function with nodal values U at x.
    double interpolate(const Eigen::VectorXd& U, const std::array<double, 2>& x) const;
};

MacroMesh build_macro_mesh(int dimension, int resolution);

struct TwoScaleState {
    double t = 0.0;
    Eigen::VectorXd U;         // macro nodal values
    Eigen::MatrixXd G;         // N x E element gradients
    Eigen::MatrixXd corrector; // cells x E, zero mean per column
    Eigen::MatrixXd w;         // F x E
    Eigen::MatrixXd q;         // F x E
    Eigen::MatrixXd flux;      // N x E, sigma-bar grad u + int_Y sigma grad_y u1
    double max_mean = 0.0;          // max |mean_Y u1|
    double flux_residual = 0.0;     // max one-sided membrane flux mismatch
    double macro_residual = 0.0;    // relative residual of the macro equation
    double cell_residual = 0.0;     // relative residual of the cell equations
};

/// Jump dynamics of the two-scale limit (length scale 1). Jump index e * F + f; facet
/// weights |e| h^(N-1).
class TwoScaleSystem final : public MembraneSystem {
public:
    TwoScaleSystem(const MacroMesh& mesh, const CellGeometry& cell, const Conductivity& sigma,
                   const BoundaryData& psi, int dense_limit = 4096);

    int size() const override { return static_cast<int>(mu_.size()); }
    const Eigen::VectorXd& weights() const override { return mu_; }
    double length_scale() const override { return 1.0; }
    const BoundaryData& boundary() const override { return psi_; }
    void apply_schur(const Eigen::VectorXd& w, Eigen::VectorXd& out) const override;
    const Eigen::VectorXd& schur_diagonal() const override { return diag_; }
    const Eigen::VectorXd& forcing_shape() const override { return q0_; }
    std::vector<std::string> norm_names() const override;
    std::vector<double> norms(const Eigen::VectorXd& w, double psi_t) const override;
    double energy(const Eigen::VectorXd& w, double psi_t) const override;
    double data_energy() const override { return data_energy_; }

    const MacroMesh& mesh() const { return mesh_; }
    const CellOperator& cell() const { return op_; }
    const Eigen::MatrixXd& stiffness() const { return K_; }
    bool dense_schur() const { return schur_.has_value(); }

    /// Macro nodal values for jump w and data scaled by psi_t.
    Eigen::VectorXd macro_values(const Eigen::VectorXd& w, double psi_t) const;
    Eigen::MatrixXd element_gradients(const Eigen::VectorXd& U) const;
    TwoScaleState state(const Eigen::VectorXd& w, double t) const;
    /// Per-row residuals of the stationarity conditions: macro rows (interior nodes), cell
    /// rows (E x cells, element-major) and facet fluxes mu q; with absolute-term scales.
    struct Rows {
        Eigen::VectorXd macro, macro_scale;
        Eigen::VectorXd cell, cell_scale;
        Eigen::VectorXd flux;  // mu q
    };
    Rows rows(const TwoScaleState& s) const;

    /// S1 sampled at the element centroid and facet midpoint.
    Eigen::VectorXd initial_jump(const InitialJump& s) const;

private:
    Eigen::VectorXd boundary_vector(double psi_t) const;

    MacroMesh mesh_;
    CellOperator op_;
    BoundaryData psi_;
    Eigen::MatrixXd K_;     // macro stiffness over all nodes
    Eigen::MatrixXd mass_;  // P1 mass over all nodes
    Eigen::LDLT<Eigen::MatrixXd> K_II_;
    std::vector<int> interior_nodes_;
    Eigen::VectorXd mu_;
    Eigen::VectorXd diag_;
    Eigen::VectorXd q0_;
    std::optional<Eigen::MatrixXd> schur_;
    double data_energy_ = 0.0;
};

/// Discrete weak-form residuals of a trajectory stored at every step (stride 1). Each test
/// pair is a macro hat, a cell unit vector or a jump unit vector times a time profile; the
/// residual is relative to the sum of the absolute term magnitudes. In the periodic
/// variant the trajectory is one period of an orbit and the profiles are periodic.
struct WeakFormReport {
    double max_macro = 0.0;
    double max_cell = 0.0;
    double max_jump = 0.0;
    int pairs = 0;
    double max() const { return std::max({max_macro, max_cell, max_jump}); }
};

WeakFormReport weak_form_residual(const TwoScaleSystem& sys, const Nonlinearity& f,
                                  const SolverParams& p, const Trajectory& traj, bool periodic);

/// Bulk L2 distance between the micro potential and the macro potential at time t.
double micro_two_scale_error(const MicroSystem& micro, const Eigen::VectorXd& w_micro,
                             const TwoScaleSystem& macro, const Eigen::VectorXd& w_macro,
                             double t);

/// Energy bound of the orbit: int sigma |grad u + grad_y u1|^2 + lambda1 int [u1]^2 <= gamma.
struct OrbitEnergyBound {
    double lhs = 0.0;
    double gamma = 0.0;
    bool pass() const { return lhs <= gamma; }
};

OrbitEnergyBound orbit_energy_bound(const TwoScaleSystem& sys, const Nonlinearity& f,
                                    const SolverParams& p, const PeriodicOrbit& orbit,
                                    double lambda1, double lambda2);

}  // namespace tissue
