#include "veil/cli.hpp"

int main(int argc, char** argv) { return veil::run_cli(argc, argv); }
