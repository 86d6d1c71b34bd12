#include "hsiu/cli.hpp"

int main(int argc, char** argv) { return hsiu::run_cli(argc, argv); }
