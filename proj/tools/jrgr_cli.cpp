#include "jrgr/cli.hpp"

int main(int argc, char** argv) { return jrgr::cli::run(argc, argv); }
