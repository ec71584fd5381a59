#pragma once

#include <string>
#include <vector>

#include "scenefit/optim.hpp"

namespace scenefit {

struct TermGradError {
    std::string term;
    double max_rel_err = 0;
};

// Compares the optimizer's adaptive-step gradient against a fixed-step
// central-difference oracle, term by term, at the given state. Both sides
// differentiate the same frozen context, with cells near an SDF sign change
// masked out so no probe straddles a hinge. The error for a term is
// max_i |f_i - g_i| / max(inf norm f, inf norm g, 1e-10).
std::vector<TermGradError> gradient_check(const SceneDocument& doc, const SceneParams& params,
                                          const RunConfig& cfg, double oracle_h = 1e-5);

// Command-line entry point (subcommands: optimize, evaluate, gradcheck,
// synth). Returns 0 on success, 1 on input or validation errors, 2 on
// optimization failures.
int run_cli(int argc, const char* const* argv);

}  // namespace scenefit
