#include "poison/cli.hpp"

int main(int argc, char** argv) { return poison::cli_main(argc, argv); }
