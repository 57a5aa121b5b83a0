#include "wavestyle/cli.hpp"

int main(int argc, char** argv) { return wavestyle::cli::main_impl(argc, argv); }
