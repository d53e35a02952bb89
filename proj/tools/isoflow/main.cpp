#include "commands.hpp"

int main(int argc, char** argv) { return isoflow::cli::run_cli(argc, argv); }
