#include "anchoragg/cli.hpp"

int main(int argc, char** argv) { return anchoragg::cli::run(argc, argv); }
