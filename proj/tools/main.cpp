#include "sbrel/cli.hpp"

int main(int argc, char** argv) { return sbrel::cli::run(argc, argv); }
