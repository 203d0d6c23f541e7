#include "relorbit/cli.hpp"

int main(int argc, char** argv) { return relorbit::cli::run(argc, argv); }
