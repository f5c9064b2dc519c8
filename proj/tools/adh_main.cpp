#include "adh/cli_io.hpp"

int main(int argc, char** argv) { return adh::cli::run(argc, argv); }
