#include "variscan/cli.hpp"

int main(int argc, char** argv) { return variscan::cli::run(argc, argv); }
