#include "lfm/cli.hpp"

int main(int argc, char** argv) { return lfm::cli::run(argc, argv); }
