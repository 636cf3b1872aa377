#include "cli.hpp"

int main(int argc, char** argv) { return thetacf::cli::run(argc, argv); }
