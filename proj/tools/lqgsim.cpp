#include "lqg/cli.hpp"

int main(int argc, char** argv) { return lqg::cli::run(argc, argv); }
