#include "lformer/cli.hpp"

int main(int argc, char** argv) { return lformer::cli::run(argc, argv); }
