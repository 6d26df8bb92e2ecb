#include "densesvm/cli.hpp"

int main(int argc, char** argv) { return densesvm::cli::run(argc, argv); }
