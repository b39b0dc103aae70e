#include "tandem/runner.hpp"

int main(int argc, char** argv) { return tandem::cli(argc, argv); }
