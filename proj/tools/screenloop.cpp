#include "screenloop/cli.hpp"

int main(int argc, char** argv) { return screenloop::cli::main(argc, argv); }
