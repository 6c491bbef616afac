#include "cli.hpp"

int main(int argc, char** argv) { return volsplat::cli::run_cli(argc, argv); }
