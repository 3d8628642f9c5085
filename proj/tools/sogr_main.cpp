#include "sogr/cli.hpp"

int main(int argc, char** argv) { return sogr::run_cli(argc, argv); }
