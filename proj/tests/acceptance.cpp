// Acceptance battery: one PASS/FAIL line per criterion; optional ids select a subset.
#include <cstdlib>
#include <iostream>
#include <set>
#include <string>

#include "frachaos/acceptance.hpp"

int main(int argc, char** argv) {
    using namespace frachaos::acceptance;
    std::set<int> want;
    for (int i = 1; i < argc; ++i) want.insert(std::atoi(argv[i]));
    const std::uint64_t seed = 20240607;
    const std::function<frachaos::CriterionResult()> all[] = {
        operator_inversion, isometry_anchor,    [&] { return exact_sampling(seed); },
        [&] { return wick_pathwise(seed); },   [&] { return moment_identities(seed); },
        kernel_recursion,   condition_taxonomy, tail_kernel_bound,
        holder_modulus,     permanent_exactness};
    bool ok = true;
    for (int id = 1; id <= 10; ++id) {
        if (!want.empty() && !want.count(id)) continue;
        const auto r = all[id - 1]();
        std::cout << frachaos::format_result(r) << std::endl;
        ok = ok && r.passed;
    }
    return ok ? 0 : 1;
}
