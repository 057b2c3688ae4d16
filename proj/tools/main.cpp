#include "cli.hpp"

int main(int argc, char** argv) { return twoway::cli::cli_main(argc, argv); }
