#include "aeroarm/cli_io.hpp"

int main(int argc, char** argv) { return aeroarm::run_cli(argc, argv); }
