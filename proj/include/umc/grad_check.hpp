#pragma once

#include "umc/layers.hpp"

#include <string>

namespace umc {

struct GradCheckResult {
    bool pass = false;
    double max_rel_error = 0.0;
    std::string worst_entry;  // "input[r,c]" or "<param name>[r,c]"
    std::size_t entries_checked = 0;
};

/// Compares op.backward against central finite differences of the scalar
/// sum(forward(x) .* R) for a fixed random R, over every input and parameter entry.
/// The op must be deterministic between calls (freeze dropout first).
GradCheckResult grad_check(DiffOp<double>& op, const Mat& input, double tol, double step = 1e-5,
                           std::uint64_t probe_seed = 7);

}  // namespace umc
