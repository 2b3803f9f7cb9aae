#include "carh/cli.hpp"

int main(int argc, char** argv) { return carh::cli::run(argc, argv); }
