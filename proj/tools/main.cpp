#include "cli.hpp"

int main(int argc, char** argv) { return dbar::run_cli(argc, argv); }
