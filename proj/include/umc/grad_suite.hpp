#pragma once

#include "umc/grad_check.hpp"

#include <string>
#include <vector>

namespace umc {

struct NamedGradCheck {
    std::string name;
    GradCheckResult result;
};

/// Every trainable layer of the model plus both contrastive losses, checked in 64-bit with
/// dropout frozen.
std::vector<NamedGradCheck> run_grad_suite(double tol = 1e-4, std::uint64_t seed = 0);

}  // namespace umc
