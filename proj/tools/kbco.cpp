#include "kbco/harness.hpp"

int main(int argc, char** argv) { return kbco::cli_main(argc, argv); }
