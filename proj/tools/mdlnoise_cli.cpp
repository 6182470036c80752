#include "mdlnoise/cli.hpp"

int main(int argc, char** argv) { return mdln::run_cli(argc, argv); }
