#include "gtfd/cli.hpp"

int main(int argc, char** argv) { return gtfd::cli::run(argc, argv); }
