#include "tailqr/cli.hpp"

int main(int argc, char** argv) { return tailqr::cli::run(argc, argv); }
