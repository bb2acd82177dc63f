#include "scatsep/cli.hpp"

int main(int argc, char** argv) { return scatsep::cli::run(argc, argv); }
