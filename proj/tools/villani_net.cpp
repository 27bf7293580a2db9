#include "villani/commands.hpp"

int main(int argc, char** argv) { return villani::cli_main(argc, argv); }
