#include <algorithm>
#include <cstdio>
#include <exception>
#include <functional>
#include <vector>

#include "criteria.hpp"

using namespace inn::acceptance;

namespace {

void report(const Outcome& o) {
    std::printf("[%s] %2d %-28s %s\n", o.pass ? "PASS" : "FAIL", o.id, o.name.c_str(), o.detail.c_str());
    std::fflush(stdout);
}

// Runs one criterion group; an exception fails the listed ids.
std::vector<Outcome> guarded(const std::vector<std::pair<int, const char*>>& ids,
                             const std::function<std::vector<Outcome>()>& body) {
    try {
        return body();
    } catch (const std::exception& e) {
        std::vector<Outcome> out;
        for (const auto& [id, name] : ids) out.push_back({id, name, false, std::string("threw: ") + e.what()});
        return out;
    }
}

} // namespace

int main() {
    std::vector<Outcome> all;
    auto run = [&](const std::vector<std::pair<int, const char*>>& ids, const std::function<std::vector<Outcome>()>& f) {
        for (const auto& o : guarded(ids, f)) {
            report(o);
            all.push_back(o);
        }
    };
    run({{1, "interval soundness"}}, [] { return std::vector{interval_soundness()}; });
    run({{2, "corner exactness"}}, [] { return std::vector{corner_exactness()}; });
    run({{4, "gradient correctness"}}, [] { return std::vector{gradient_correctness()}; });
    run({{10, "baseline correctness"}}, [] { return std::vector{baseline_correctness()}; });
    run({{3, "containment invariant"},
         {5, "coverage"},
         {6, "markov bound"},
         {7, "directional information"},
         {9, "error-proxy ordering"},
         {11, "runtime accounting"},
         {12, "determinism"}},
        [] { return desk_runs(); });
    run({{8, "noise adaptivity"}}, [] { return std::vector{noise_adaptivity()}; });

    std::sort(all.begin(), all.end(), [](const Outcome& a, const Outcome& b) { return a.id < b.id; });
    const auto passed = std::count_if(all.begin(), all.end(), [](const Outcome& o) { return o.pass; });
    std::printf("\nsummary (by criterion):\n");
    for (const auto& o : all) std::printf("  %2d %s\n", o.id, o.pass ? "PASS" : "FAIL");
    std::printf("%ld/%zu criteria passed\n", static_cast<long>(passed), all.size());
    return passed == static_cast<long>(all.size()) ? 0 : 1;
}
