#include "mls/cli.hpp"

int main(int argc, char** argv) { return mls::run_cli(argc, argv); }
