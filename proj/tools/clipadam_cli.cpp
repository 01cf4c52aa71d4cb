#include "clipadam/harness/cli.hpp"

int main(int argc, char** argv) { return clipadam::harness::run_cli(argc, argv); }
