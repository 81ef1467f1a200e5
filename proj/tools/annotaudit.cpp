#include "annotaudit/cli.hpp"

int main(int argc, char** argv) { return annotaudit::cli::run(argc, argv); }
