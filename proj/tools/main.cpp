#include "cli.hpp"

int main(int argc, char** argv) { return classb::cli::run(argc, argv); }
