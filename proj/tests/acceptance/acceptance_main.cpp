// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The dropmuon authors
//
// Prints one PASS/FAIL line per acceptance criterion; exits non-zero if any fails.

#include <iostream>

#include <dropmuon/harness/criteria.hpp>

int main() {
    namespace hx = dropmuon::harness;
    int failed = 0;
    int n = 0;
    for (const auto& criterion : hx::acceptance_criteria()) {
        const auto r = criterion();
        ++n;
        failed += !r.passed;
        std::cout << (r.passed ? "PASS" : "FAIL") << " criterion " << n << " (" << r.description << ") ["
                  << hx::format_number(r.seconds) << " s of " << hx::format_number(r.budget_seconds) << " s]: "
                  << r.detail << std::endl;
    }
    std::cout << (failed ? "FAIL" : "PASS") << " acceptance: " << n - failed << "/" << n << " criteria passed"
              << std::endl;
    return failed ? 1 : 0;
}
