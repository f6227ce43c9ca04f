#include "flowids/cli.hpp"

int main(int argc, char** argv) { return flowids::run_cli(argc, argv); }
