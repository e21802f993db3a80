#include "rlfbm/cli.hpp"

int main(int argc, char** argv) { return rlfbm::cli_main(argc, argv); }
