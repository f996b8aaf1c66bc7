#include "cachesec/cli.hpp"

int main(int argc, char** argv) { return cachesec::run_cli(argc, argv); }
