#include "motioncode/cli.hpp"

int main(int argc, char** argv) { return motioncode::cli::run(argc, argv); }
