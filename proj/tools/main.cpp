#include "cli.hpp"

int main(int argc, char** argv) { return docstormer::cli::run(argc, argv); }
