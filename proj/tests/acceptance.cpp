#include <cstdlib>
#include <iostream>

#include "classb/acceptance.hpp"

int main(int argc, char** argv) {
    classb::acceptance::Options opt;
    if (const char* seed = std::getenv("CLASSB_SEED")) opt.seed = std::strtoull(seed, nullptr, 10);
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));

    int failed = 0;
    int run = 0;
    for (int id = 1; id <= static_cast<int>(classb::acceptance::criterion_count()); ++id) {
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        const auto r = classb::acceptance::run_criterion(id, opt);
        std::cout << classb::acceptance::format_line(r) << std::endl;
        ++run;
        failed += r.pass ? 0 : 1;
    }
    std::cout << (run - failed) << "/" << run << " acceptance criteria passed" << std::endl;
    return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
