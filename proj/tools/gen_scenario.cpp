// Regenerates the versioned escalation-ladder scenario fixtures.

#include <cstdio>

#include "uicrawl/scenario.hpp"

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: gen_scenario <output-dir>\n");
        return 2;
    }
    uicrawl::scenario::write_scenario86(argv[1]);
    std::printf("wrote scenario fixtures to %s\n", argv[1]);
    return 0;
}
