#include "mflag/cli.hpp"

int main(int argc, char** argv) { return mflag::cli::run(argc, argv); }
