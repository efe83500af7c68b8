#pragma once

#include <functional>
#include <string>
#include <vector>

#include "arvae/posterior.hpp"

namespace arvae {

struct CheckResult {
    std::string name;
    double max_error = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

// Seams for mutation-style tests: a non-null hook replaces the production
// routine inside the value checks, which must then fail by name.
struct CheckHooks {
    std::function<double(const Ar1Posterior&)> kl_ar1_fn;
};

// Deterministic invariant grid plus gradient checks over the correlated
// posterior machinery. Fixed seeds throughout: repeated runs produce the
// identical table.
std::vector<CheckResult> run_self_checks(const CheckHooks& hooks = {});

std::string format_check_table(const std::vector<CheckResult>& results);

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace arvae
