#include "hxkit/cli.hpp"

int main(int argc, char** argv) { return hxkit::cli::main(argc, argv); }
