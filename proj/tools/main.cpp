#include "palign/cli.hpp"

int main(int argc, char** argv) { return palign::run_cli(argc, argv); }
