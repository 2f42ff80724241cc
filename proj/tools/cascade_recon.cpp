#include "cascade_recon/cli.hpp"

int main(int argc, char** argv) { return cascade_recon::cli::run_command(argc, argv); }
