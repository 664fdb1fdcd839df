#include "serpaudit/cli.hpp"

int main(int argc, char** argv) { return serpaudit::cli::run_cli(argc, argv); }
