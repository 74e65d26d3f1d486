#include "hexcast/cli.hpp"

int main(int argc, char** argv) { return hexcast::cli::run(argc, argv); }
