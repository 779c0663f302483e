#include "ltrc/cli.hpp"

int main(int argc, char** argv) { return ltrc::cli::run(argc, argv); }
