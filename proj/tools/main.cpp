#include "gaussenv/cli.hpp"

int main(int argc, char** argv) { return gaussenv::cli::run(argc, argv); }
