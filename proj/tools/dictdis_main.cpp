#include "dictdis/cli.hpp"

int main(int argc, char** argv) { return dictdis::cli::run(argc, argv); }
