#pragma once

#include <string>
#include <vector>

#include "tissue/config.hpp"

namespace tissue {

struct RunOptions {
    std::string out_dir;  // overrides the configured output directory when set
    int threads = 1;
};

/// One entry of the invariant suite run by `verify`.
struct InvariantCheck {
    std::string name;
    bool pass = false;
    double value = 0.0;
    double threshold = 0.0;
    std::string note;
};

std::vector<InvariantCheck> run_invariant_suite(const RunConfig& c);

/// Runs a subcommand and returns its exit code; artifacts go to the output directory.
/// Subcommands: simulate, periodic, decay, homogenize, verify, compare.
int run(const std::string& subcommand, const RunConfig& c, const RunOptions& options);

/// Column documentation per subcommand, for --help.
std::string describe_outputs();

}  // namespace tissue
