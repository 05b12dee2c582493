#include "cli.hpp"

int main(int argc, char** argv) { return gexp_cli::main_entry(argc, argv); }
