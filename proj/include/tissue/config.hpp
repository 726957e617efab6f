#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tissue/boundary_data.hpp"
#include "tissue/geometry.hpp"
#include "tissue/membrane.hpp"
#include "tissue/nonlinearity.hpp"
#include "tissue/periodic_solver.hpp"

namespace tissue {

inline constexpr const char* kVersion = "1.0.0";

/// Exit codes of the command line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitSolver = 1,
    kExitParse = 2,
    kExitValidation = 3,
    kExitInvariant = 4,
};

/// Configuration failure carrying the exit code it maps to.
class ConfigError : public std::runtime_error {
public:
    ConfigError(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
    int code() const { return code_; }

private:
    int code_;
};

/// Flat `key = value` run configuration. Lists are comma separated, `#` starts a comment.
struct RunConfig {
    int dimension = 2;
    double inclusion_margin = 0.25;
    int cell_resolution = 8;
    double epsilon = 0.25;
    double sigma_int = 2.0;
    double sigma_out = 1.0;
    double alpha = 1.0;

    std::string f_kind = "sine";
    double f_kappa = 1.0;
    double f_delta_shift = 1e-2;

    std::string psi_spatial = "sines";
    std::string psi_temporal = "sine";
    double psi_amplitude = 1.0;
    double psi_offset = 0.5;

    double dt = 1e-3;
    double horizon = 10.0;  // time units; the data period is 1
    int sample_stride = 10;

    std::string init_kind = "random";
    double init_amplitude = 1.0;

    double newton_tol = 1e-12;
    int newton_max_iters = 50;
    double linear_tol = 1e-14;
    int linear_max_iters = 1000;

    double periodic_tol = 1e-8;
    int periodic_max_iters = 500;
    std::string periodic_method = "picard";  // picard | delta
    std::vector<double> periodic_deltas{0.1, 0.01, 0.001};

    int macro_resolution = 4;
    int macro_dimension = 2;

    std::vector<double> compare_epsilons{0.5, 0.25, 0.125};

    std::uint64_t seed = 1;
    std::string output = "out";

    CellGeometry cell() const;
    EpsilonDomain domain(double eps) const;
    Conductivity sigma() const { return {sigma_int, sigma_out}; }
    Nonlinearity nonlinearity() const;
    BoundaryData boundary() const;
    InitialJump initial_jump() const;
    SolverParams solver() const;
    PicardOptions picard() const;
    int total_steps() const;
};

/// Parses and validates a configuration file. Throws ConfigError with code 2 for
/// malformed input (with the line number) and 3 for unknown keys or out-of-range values.
RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& source = "<config>");

/// Canonical rendering of every field, one `key = value` line each, in a fixed order.
std::string render_config(const RunConfig& c);

/// Hex CRC-32 of the canonical rendering.
std::string config_hash(const RunConfig& c);

/// Checks every field against its documented range; throws ConfigError(3).
void validate(const RunConfig& c);

}  // namespace tissue
