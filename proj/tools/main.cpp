#include "echofight/cli.hpp"

int main(int argc, char** argv) { return echofight::evalkit::run_cli(argc, argv); }
