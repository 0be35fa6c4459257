#include "partfit/cli.hpp"

int main(int argc, char** argv) { return partfit::cli::run_cli(argc, argv); }
