#include "nashbsde/cli.hpp"

int main(int argc, char** argv) { return nashbsde::cli::run(argc, argv); }
