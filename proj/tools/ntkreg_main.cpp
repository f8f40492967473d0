#include "ntkreg/cli.hpp"

int main(int argc, char** argv) { return ntkreg::cli_main(argc, argv); }
